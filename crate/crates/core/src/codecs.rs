//! Line codes for binary concentration shift keying.
//!
//! Bits are `u8` values `0`/`1`. Four-bit codewords are handled internally as
//! big-endian nibbles (first transmitted bit is the most significant).

use crate::error::{invalid, Error, Result};
use num_rational::Ratio;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

/// The four coding schemes compared by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CodecId {
    Uncoded,
    IsiFree421,
    Repetition3,
    IsiMitigating421,
}

impl CodecId {
    pub const ALL: [CodecId; 4] = [
        CodecId::Uncoded,
        CodecId::IsiFree421,
        CodecId::Repetition3,
        CodecId::IsiMitigating421,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CodecId::Uncoded => "uncoded",
            CodecId::IsiFree421 => "isi-free",
            CodecId::Repetition3 => "repetition-3",
            CodecId::IsiMitigating421 => "isi-mitigating",
        }
    }

    /// Information bits per block (`k`).
    pub fn info_len(self) -> usize {
        match self {
            CodecId::Uncoded | CodecId::Repetition3 => 1,
            CodecId::IsiFree421 | CodecId::IsiMitigating421 => 2,
        }
    }

    /// Coded bits per block (`n`).
    pub fn block_len(self) -> usize {
        match self {
            CodecId::Uncoded => 1,
            CodecId::Repetition3 => 3,
            CodecId::IsiFree421 | CodecId::IsiMitigating421 => 4,
        }
    }

    /// Information bits per coded bit, `k / n`.
    pub fn code_rate(self) -> Ratio<u32> {
        Ratio::new(self.info_len() as u32, self.block_len() as u32)
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodecId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uncoded" | "csk" => Ok(CodecId::Uncoded),
            "isi-free" | "isi_free" | "isifree421" => Ok(CodecId::IsiFree421),
            "repetition-3" | "repetition3" | "rep3" => Ok(CodecId::Repetition3),
            "isi-mitigating" | "isi_mitigating" | "isimitigating421" => {
                Ok(CodecId::IsiMitigating421)
            }
            other => invalid(format!("unknown codec '{other}'")),
        }
    }
}

/// Free-function form of [`CodecId::code_rate`].
pub fn code_rate(codec: CodecId) -> Ratio<u32> {
    codec.code_rate()
}

/// ISI-mitigating (4,2,1) codewords indexed by the information pair.
pub const ISI_MITIGATING_CODEWORDS: [u8; 4] = [0b0000, 0b0100, 0b1000, 0b1010];

/// Received words the ISI-mitigating decoder maps back to a specific pair.
pub const ISI_MITIGATING_CORRECTIONS: [(u8, u8); 5] = [
    (0b0010, 0b01),
    (0b1100, 0b10),
    (0b1011, 0b11),
    (0b1110, 0b11),
    (0b1111, 0b11),
];

/// ISI-free (4,2,1) codewords: `[starting with 0, starting with 1]`, indexed
/// by the information pair.
pub const ISI_FREE_CODEWORDS: [[u8; 4]; 2] = [
    [0b0000, 0b0001, 0b0011, 0b0111],
    [0b1111, 0b1000, 0b1100, 0b1110],
];

static ISI_MITIGATING_DECODE: LazyLock<[u8; 16]> = LazyLock::new(|| {
    let mut table = [0u8; 16];
    for (word, slot) in table.iter_mut().enumerate() {
        let word = word as u8;
        *slot = if let Some(info) = ISI_MITIGATING_CODEWORDS.iter().position(|&c| c == word) {
            info as u8
        } else if let Some(&(_, info)) = ISI_MITIGATING_CORRECTIONS.iter().find(|(w, _)| *w == word) {
            info
        } else {
            nearest(word, &ISI_MITIGATING_CODEWORDS)
        };
    }
    table
});

static ISI_FREE_DECODE: LazyLock<[[u8; 16]; 2]> = LazyLock::new(|| {
    let mut table = [[0u8; 16]; 2];
    for state in 0..2 {
        let codewords = &ISI_FREE_CODEWORDS[state];
        let sets: Vec<Vec<u8>> = codewords.iter().map(|&c| crossover_set(c, 4)).collect();
        for word in 0..16u8 {
            table[state][word as usize] = match sets.iter().position(|s| s.contains(&word)) {
                Some(info) => info as u8,
                None => nearest(word, codewords),
            };
        }
    }
    table
});

/// Index of the codeword closest to `word` in Hamming distance, ties going to
/// the numerically smallest codeword.
fn nearest(word: u8, codewords: &[u8]) -> u8 {
    let mut best = 0usize;
    for (i, &c) in codewords.iter().enumerate() {
        let dist = (c ^ word).count_ones();
        let best_dist = (codewords[best] ^ word).count_ones();
        if dist < best_dist || (dist == best_dist && c < codewords[best]) {
            best = i;
        }
    }
    best as u8
}

/// Level-1 crossover permutation set of an `n`-bit codeword: every word
/// obtained by delaying any subset of its `10` transitions by one slot
/// (`10` becomes `01`). Includes the codeword itself; sorted ascending.
pub fn crossover_set(codeword: u8, n: usize) -> Vec<u8> {
    let bit = |w: u8, i: usize| (w >> (n - 1 - i)) & 1;
    let transitions: Vec<usize> = (0..n.saturating_sub(1))
        .filter(|&i| bit(codeword, i) == 1 && bit(codeword, i + 1) == 0)
        .collect();
    let mut out = Vec::with_capacity(1 << transitions.len());
    for mask in 0..(1u32 << transitions.len()) {
        let mut w = codeword;
        for (j, &i) in transitions.iter().enumerate() {
            if mask & (1 << j) != 0 {
                // swap positions i and i+1: 10 -> 01
                w ^= (1 << (n - 1 - i)) | (1 << (n - 2 - i));
            }
        }
        out.push(w);
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn pack(bits: &[u8]) -> u8 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b)
}

fn unpack(word: u8, n: usize, out: &mut Vec<u8>) {
    out.extend((0..n).rev().map(|i| (word >> i) & 1));
}

fn check_word(word: &[u8], n: usize) -> Result<()> {
    if word.len() != n {
        return invalid(format!("expected a {n}-bit word, got {} bits", word.len()));
    }
    check_binary(word)
}

fn check_binary(bits: &[u8]) -> Result<()> {
    match bits.iter().position(|&b| b > 1) {
        Some(i) => invalid(format!("bit {i} has value {} (expected 0 or 1)", bits[i])),
        None => Ok(()),
    }
}

/// Decodes one ISI-mitigating codeword into its information pair.
///
/// Exact codewords and the correction entries map per the code table; every
/// other word goes to the nearest codeword.
pub fn decode_isi_mitigating(word: &[u8]) -> Result<[u8; 2]> {
    check_word(word, 4)?;
    let info = ISI_MITIGATING_DECODE[pack(word) as usize];
    Ok([info >> 1, info & 1])
}

/// Decodes one ISI-free codeword given the last bit of the previous word.
pub fn decode_isi_free(word: &[u8], prev_last_bit: u8) -> Result<[u8; 2]> {
    check_word(word, 4)?;
    if prev_last_bit > 1 {
        return invalid("previous last bit must be 0 or 1");
    }
    let info = ISI_FREE_DECODE[prev_last_bit as usize][pack(word) as usize];
    Ok([info >> 1, info & 1])
}

/// Majority vote over three repeated bits.
pub fn decode_repetition3(word: &[u8]) -> Result<u8> {
    check_word(word, 3)?;
    Ok(u8::from(word.iter().sum::<u8>() >= 2))
}

/// Coded stream plus the number of zero bits appended to the information.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub bits: Vec<u8>,
    pub padding: usize,
}

/// Encodes an information sequence block by block.
///
/// Pair codes pad an odd-length input with one trailing zero. The ISI-free
/// encoder starts each codeword with the last bit of the previous one
/// (initially 0), so every codeword seam reads `00` or `11`.
pub fn encode_stream(codec: CodecId, info: &[u8]) -> Result<Encoded> {
    if info.is_empty() {
        return invalid("information sequence is empty");
    }
    check_binary(info)?;
    let k = codec.info_len();
    let padding = (k - info.len() % k) % k;
    let mut padded;
    let info = if padding > 0 {
        padded = info.to_vec();
        padded.resize(info.len() + padding, 0);
        &padded[..]
    } else {
        info
    };
    let mut bits = Vec::with_capacity(info.len() / k * codec.block_len());
    match codec {
        CodecId::Uncoded => bits.extend_from_slice(info),
        CodecId::Repetition3 => {
            for &b in info {
                bits.extend_from_slice(&[b, b, b]);
            }
        }
        CodecId::IsiMitigating421 => {
            for pair in info.chunks_exact(2) {
                unpack(ISI_MITIGATING_CODEWORDS[pack(pair) as usize], 4, &mut bits);
            }
        }
        CodecId::IsiFree421 => {
            let mut last = 0u8;
            for pair in info.chunks_exact(2) {
                let cw = ISI_FREE_CODEWORDS[last as usize][pack(pair) as usize];
                unpack(cw, 4, &mut bits);
                last = cw & 1;
            }
        }
    }
    Ok(Encoded { bits, padding })
}

/// Decodes a coded stream and strips `padding` trailing information bits.
///
/// The ISI-free decoder takes its state from the last detected bit of the
/// previous received word.
pub fn decode_stream(codec: CodecId, bits: &[u8], padding: usize) -> Result<Vec<u8>> {
    let n = codec.block_len();
    if bits.len() % n != 0 {
        return Err(Error::Framing { len: bits.len(), block: n });
    }
    check_binary(bits)?;
    let mut info = Vec::with_capacity(bits.len() / n * codec.info_len());
    match codec {
        CodecId::Uncoded => info.extend_from_slice(bits),
        CodecId::Repetition3 => {
            info.extend(bits.chunks_exact(3).map(|w| u8::from(w[0] + w[1] + w[2] >= 2)));
        }
        CodecId::IsiMitigating421 => {
            for w in bits.chunks_exact(4) {
                unpack(ISI_MITIGATING_DECODE[pack(w) as usize], 2, &mut info);
            }
        }
        CodecId::IsiFree421 => {
            let mut state = 0usize;
            for w in bits.chunks_exact(4) {
                unpack(ISI_FREE_DECODE[state][pack(w) as usize], 2, &mut info);
                state = w[3] as usize;
            }
        }
    }
    if padding > info.len() {
        return invalid(format!("padding {padding} exceeds decoded length {}", info.len()));
    }
    info.truncate(info.len() - padding);
    Ok(info)
}

fn word_string(word: u8, n: usize) -> String {
    (0..n).rev().map(|i| if (word >> i) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Codebook of a codec as CSV with columns `info_bits,codeword,corrections`.
///
/// Multiple entries within a field are separated by `;`. For the ISI-free
/// code the codeword field lists both variants and the corrections field the
/// non-trivial members of their crossover sets.
pub fn table_csv(codec: CodecId) -> String {
    let mut out = String::from("info_bits,codeword,corrections\n");
    match codec {
        CodecId::Uncoded => out.push_str("0,0,\n1,1,\n"),
        CodecId::Repetition3 => out.push_str("0,000,\n1,111,\n"),
        CodecId::IsiMitigating421 => {
            for (info, &cw) in ISI_MITIGATING_CODEWORDS.iter().enumerate() {
                let fixes: Vec<String> = ISI_MITIGATING_CORRECTIONS
                    .iter()
                    .filter(|(_, i)| *i as usize == info)
                    .map(|(w, _)| word_string(*w, 4))
                    .collect();
                out.push_str(&format!(
                    "{},{},{}\n",
                    word_string(info as u8, 2),
                    word_string(cw, 4),
                    fixes.join(";")
                ));
            }
        }
        CodecId::IsiFree421 => {
            for info in 0..4 {
                let variants = [ISI_FREE_CODEWORDS[0][info], ISI_FREE_CODEWORDS[1][info]];
                let delayed: Vec<String> = variants
                    .iter()
                    .flat_map(|&c| crossover_set(c, 4).into_iter().filter(move |&w| w != c))
                    .map(|w| word_string(w, 4))
                    .collect();
                out.push_str(&format!(
                    "{},{};{},{}\n",
                    word_string(info as u8, 2),
                    word_string(variants[0], 4),
                    word_string(variants[1], 4),
                    delayed.join(";")
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|c| c - b'0').collect()
    }

    #[test]
    fn isi_mitigating_encoding() {
        for (info, cw) in [("00", "0000"), ("01", "0100"), ("10", "1000"), ("11", "1010")] {
            assert_eq!(encode_stream(CodecId::IsiMitigating421, &bits(info)).unwrap().bits, bits(cw));
        }
    }

    #[test]
    fn repetition_encoding() {
        assert_eq!(encode_stream(CodecId::Repetition3, &[1]).unwrap().bits, bits("111"));
        assert_eq!(encode_stream(CodecId::Repetition3, &[0]).unwrap().bits, bits("000"));
    }

    #[test]
    fn isi_free_variant_follows_previous_last_bit() {
        let enc = encode_stream(CodecId::IsiFree421, &bits("1001")).unwrap();
        assert_eq!(enc.bits, bits("00111000"));
        // every pair from both states
        for info in 0..4u8 {
            let pair = [info >> 1, info & 1];
            let from0 = encode_stream(CodecId::IsiFree421, &pair).unwrap().bits;
            assert_eq!(pack(&from0), ISI_FREE_CODEWORDS[0][info as usize]);
            // 00 -> 0000 leaves state 0; 01 -> 0001 moves to state 1
            let mut prefixed = vec![0, 1];
            prefixed.extend_from_slice(&pair);
            let from1 = encode_stream(CodecId::IsiFree421, &prefixed).unwrap().bits;
            assert_eq!(pack(&from1[4..]), ISI_FREE_CODEWORDS[1][info as usize]);
        }
    }

    #[test]
    fn isi_mitigating_decoding_examples() {
        assert_eq!(decode_isi_mitigating(&bits("1010")).unwrap(), [1, 1]);
        assert_eq!(decode_isi_mitigating(&bits("1110")).unwrap(), [1, 1]);
        assert_eq!(decode_isi_mitigating(&bits("0001")).unwrap(), [0, 0]);
        for (w, info) in [("0010", "01"), ("1100", "10"), ("1011", "11"), ("1110", "11"), ("1111", "11")] {
            assert_eq!(decode_isi_mitigating(&bits(w)).unwrap().to_vec(), bits(info));
        }
        assert!(decode_isi_mitigating(&bits("010")).is_err());
    }

    #[test]
    fn isi_mitigating_fallback_is_brute_force_nearest() {
        let exact: Vec<u8> = ISI_MITIGATING_CODEWORDS.to_vec();
        let corrected: Vec<u8> = ISI_MITIGATING_CORRECTIONS.iter().map(|c| c.0).collect();
        assert!(exact.iter().all(|w| !corrected.contains(w)));
        for word in 0..16u8 {
            if exact.contains(&word) || corrected.contains(&word) {
                continue;
            }
            let dists: Vec<u32> = exact.iter().map(|&c| (c ^ word).count_ones()).collect();
            let min = *dists.iter().min().unwrap();
            let expect = dists.iter().position(|&d| d == min).unwrap() as u8;
            let mut w = Vec::new();
            unpack(word, 4, &mut w);
            assert_eq!(decode_isi_mitigating(&w).unwrap(), [expect >> 1, expect & 1]);
        }
    }

    #[test]
    fn isi_free_decoding_examples() {
        assert_eq!(decode_isi_free(&bits("0011"), 0).unwrap(), [1, 0]);
        assert_eq!(decode_isi_free(&bits("0100"), 1).unwrap(), [0, 1]);
        assert_eq!(decode_isi_free(&bits("0000"), 0).unwrap(), [0, 0]);
        assert!(decode_isi_free(&bits("00000"), 0).is_err());
        assert!(decode_isi_free(&bits("0000"), 2).is_err());
    }

    #[test]
    fn crossover_sets_are_disjoint_per_state() {
        for state in 0..2 {
            let sets: Vec<Vec<u8>> =
                ISI_FREE_CODEWORDS[state].iter().map(|&c| crossover_set(c, 4)).collect();
            for i in 0..4 {
                for j in (i + 1)..4 {
                    assert!(sets[i].iter().all(|w| !sets[j].contains(w)), "state {state}: {i} vs {j}");
                }
            }
        }
        assert_eq!(crossover_set(0b1000, 4), vec![0b0100, 0b1000]);
        // 0100 is reachable only from 1000 among the state-1 words
        let owners: Vec<u8> = ISI_FREE_CODEWORDS[1]
            .iter()
            .copied()
            .filter(|&c| crossover_set(c, 4).contains(&0b0100))
            .collect();
        assert_eq!(owners, vec![0b1000]);
        assert_eq!(crossover_set(0b1010, 4), vec![0b0101, 0b0110, 0b1001, 0b1010]);
    }

    #[test]
    fn repetition_majority() {
        assert_eq!(decode_repetition3(&bits("000")).unwrap(), 0);
        assert_eq!(decode_repetition3(&bits("101")).unwrap(), 1);
        assert_eq!(decode_repetition3(&bits("001")).unwrap(), 0);
        assert!(decode_repetition3(&bits("0011")).is_err());
    }

    #[test]
    fn stream_decoding_and_framing() {
        assert_eq!(
            decode_stream(CodecId::IsiMitigating421, &bits("01001010"), 0).unwrap(),
            bits("0111")
        );
        assert_eq!(decode_stream(CodecId::Uncoded, &bits("10110"), 0).unwrap(), bits("10110"));
        assert_eq!(
            decode_stream(CodecId::Repetition3, &bits("0000"), 0),
            Err(Error::Framing { len: 4, block: 3 })
        );
        assert!(encode_stream(CodecId::Uncoded, &[]).is_err());
        assert!(encode_stream(CodecId::Uncoded, &[2]).is_err());
    }

    #[test]
    fn odd_length_padding() {
        let enc = encode_stream(CodecId::IsiMitigating421, &bits("011")).unwrap();
        assert_eq!(enc.padding, 1);
        assert_eq!(enc.bits, bits("01001000"));
        let dec = decode_stream(CodecId::IsiMitigating421, &enc.bits, enc.padding).unwrap();
        assert_eq!(dec, bits("011"));
    }

    #[test]
    fn code_rates() {
        assert_eq!(code_rate(CodecId::Uncoded), Ratio::new(1, 1));
        assert_eq!(code_rate(CodecId::IsiFree421), Ratio::new(1, 2));
        assert_eq!(code_rate(CodecId::Repetition3), Ratio::new(1, 3));
        assert_eq!(code_rate(CodecId::IsiMitigating421), Ratio::new(1, 2));
        assert!(code_rate(CodecId::IsiMitigating421) > code_rate(CodecId::Repetition3));
    }

    #[test]
    fn codec_names_round_trip() {
        for codec in CodecId::ALL {
            assert_eq!(codec.name().parse::<CodecId>().unwrap(), codec);
        }
        assert!("hamming".parse::<CodecId>().is_err());
    }

    #[test]
    fn table_export() {
        let csv = table_csv(CodecId::IsiMitigating421);
        assert_eq!(
            csv,
            "info_bits,codeword,corrections\n00,0000,\n01,0100,0010\n10,1000,1100\n11,1010,1011;1110;1111\n"
        );
        let free = table_csv(CodecId::IsiFree421);
        assert!(free.contains("01,0001;1000,0100\n"));
    }

    proptest! {
        #[test]
        fn noiseless_round_trip(info in prop::collection::vec(0u8..2, 1..400)) {
            for codec in CodecId::ALL {
                let enc = encode_stream(codec, &info).unwrap();
                prop_assert_eq!(enc.bits.len() % codec.block_len(), 0);
                let dec = decode_stream(codec, &enc.bits, enc.padding).unwrap();
                prop_assert_eq!(&dec, &info);
            }
        }

        #[test]
        fn isi_mitigating_stream_is_constrained(info in prop::collection::vec(0u8..2, 1..400)) {
            let enc = encode_stream(CodecId::IsiMitigating421, &info).unwrap();
            prop_assert!(enc.bits.windows(2).all(|w| w != [1, 1]));
            prop_assert!(enc.bits.chunks(4).all(|c| c[3] == 0));
        }

        #[test]
        fn isi_free_seams_never_switch(info in prop::collection::vec(0u8..2, 2..400)) {
            let enc = encode_stream(CodecId::IsiFree421, &info).unwrap();
            prop_assert_eq!(enc.bits[0], 0);
            for seam in (4..enc.bits.len()).step_by(4) {
                prop_assert_eq!(enc.bits[seam - 1], enc.bits[seam]);
            }
        }
    }
}
