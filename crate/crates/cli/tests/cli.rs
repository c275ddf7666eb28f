use dbmc_cli::main_with_args;
use std::path::PathBuf;
use std::process::Command;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dbmc-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> (u8, String) {
    let out = scratch(&format!("{}.csv", args.join("_").replace(['=', ',', '/'], "-")));
    let mut full = vec!["dbmc"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", out.to_str().unwrap()]);
    let code = main_with_args(full);
    (code, std::fs::read_to_string(&out).unwrap_or_default())
}

fn body(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn single_point_grid_gives_one_row_per_codec() {
    let (code, text) = run(&["sweep-snr", "--quick", "--set", "snr_grid=10", "--set", "codecs=uncoded"]);
    assert_eq!(code, 0);
    let rows = body(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "10");
    assert_eq!(rows[0][1], "uncoded");
    assert!(!rows[0][4].is_empty(), "uncoded has a closed form");
    assert_eq!(rows[0][5], "", "no rate in a BER sweep");
    assert!(text.contains("# n_info_bits = 20000\n"));
}

#[test]
fn scalar_sweep_single_value() {
    let (code, text) =
        run(&["sweep-scalar", "--axis", "radius", "--quick", "--set", "scalar_grid=4e-5", "--set", "codecs=repetition-3"]);
    assert_eq!(code, 0);
    let rows = body(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][4], "", "repetition-3 has no closed form");
    assert!(text.contains("# axis_value = radius\n"));
}

#[test]
fn ber_falls_with_receiver_radius() {
    let (_, text) = run(&["sweep-scalar", "--axis", "radius", "--set", "n_info_bits=200000", "--set", "codecs=uncoded,isi-mitigating"]);
    for codec in ["uncoded", "isi-mitigating"] {
        let rows: Vec<_> = body(&text).into_iter().filter(|r| r[1] == codec).collect();
        for w in rows.windows(2) {
            let (a, b): (f64, f64) = (w[0][2].parse().unwrap(), w[1][2].parse().unwrap());
            let slack = 3.0 * w[0][3].parse::<f64>().unwrap().hypot(w[1][3].parse().unwrap());
            assert!(b <= a + slack, "{codec}: {a} -> {b}");
        }
    }
}

#[test]
fn rates_respect_code_rate_and_grow_with_snr() {
    let (code, text) = run(&["rate", "--quick", "--set", "snr_grid=0,24"]);
    assert_eq!(code, 0);
    let rows = body(&text);
    assert_eq!(rows.len(), 8);
    for r in &rows {
        let rate: f64 = r[5].parse().unwrap();
        let bound = match r[1].as_str() {
            "uncoded" => 1.0,
            "repetition-3" => 1.0 / 3.0,
            _ => 0.5,
        };
        assert!((0.0..=bound).contains(&rate), "{r:?}");
        assert_eq!(r[2], "");
    }
    for codec in ["uncoded", "isi-free", "repetition-3", "isi-mitigating"] {
        let rate = |snr: &str| -> f64 { rows.iter().find(|r| r[0] == snr && r[1] == codec).unwrap()[5].parse().unwrap() };
        assert!(rate("0") < rate("24"), "{codec}");
    }
    let mit = rows.iter().find(|r| r[1] == "isi-mitigating").unwrap();
    assert_eq!(mit[6], "", "closed-form rate uses no simulated bits");
}

#[test]
fn memory_sweep_matches_snr_sweep_shape() {
    let (code, text) = run(&["sweep-memory", "--quick"]);
    assert_eq!(code, 0);
    let rows = body(&text);
    assert_eq!(rows.len(), 12);
    let axes: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(&axes[..4], &["1", "1", "1", "1"]);
    // the ISI-mitigating closed form is only reported at L = 1
    assert!(rows.iter().any(|r| r[0] == "1" && r[1] == "isi-mitigating" && !r[4].is_empty()));
    assert!(rows.iter().any(|r| r[0] == "3" && r[1] == "isi-mitigating" && r[4].is_empty()));
}

#[test]
fn validate_channel_passes_and_corrupted_cdf_fails() {
    let (code, text) = run(&["validate-channel", "--quick"]);
    assert_eq!(code, 0);
    assert!(text.contains("slot_index,hits,cumulative_fraction\n"));
    assert!(text.trim_end().ends_with(",1"));
    let (code, _) = run(&["validate-channel", "--quick", "--set", "cdf_scale=1.5"]);
    assert_eq!(code, 1);
}

#[test]
fn optimizer_never_loses_to_default() {
    let (code, text) = run(&["optimize-threshold", "--quick"]);
    assert_eq!(code, 0);
    let rows = body(&text);
    assert_eq!(rows.len(), 4);
    for r in rows {
        let (opt, def): (f64, f64) = (r[3].parse().unwrap(), r[5].parse().unwrap());
        assert!(opt <= def, "{r:?}");
        assert!(r[2].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn tables_and_trace_exports() {
    let (_, tables) = run(&["tables"]);
    assert!(tables.contains("codec,info_bits,codeword,corrections\n"));
    assert!(tables.contains("isi-mitigating,11,1010,1011;1110;1111\n"));
    let (_, trace) = run(&["trace", "--set", "n_info_bits=8", "--set", "codecs=repetition-3"]);
    let rows = body(&trace);
    assert!(trace.contains("slot,tx_bit,count,rx_bit\n"));
    assert_eq!(rows.len(), 24);
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    assert_eq!(main_with_args(["dbmc", "sweep-snr", "--set", "bogus=1"]), 2);
    assert_eq!(main_with_args(["dbmc", "sweep-snr", "--set", "snr_grid=4,2"]), 2);
    assert_eq!(main_with_args(["dbmc", "no-such-command"]), 2);
    assert_eq!(main_with_args(["dbmc", "sweep-snr", "--config", "/nonexistent/dbmc.conf"]), 2);
    assert_eq!(main_with_args(["dbmc", "--help"]), 0);
    let code = main_with_args(["dbmc", "sweep-snr", "--quick", "--set", "snr_grid=0", "--out", "/nonexistent-dir/out.csv"]);
    assert_eq!(code, 2);
}

#[test]
fn config_file_and_flags_compose() {
    let conf = scratch("exp.conf");
    std::fs::write(&conf, "# reduced run\nsnr_grid = 6\ncodecs = isi-mitigating\nseed = 3\nn_info_bits = 1000\n").unwrap();
    let (code, text) = run(&["sweep-snr", "--config", conf.to_str().unwrap(), "--seed", "11"]);
    assert_eq!(code, 0);
    assert!(text.contains("# seed = 11\n"));
    assert!(text.contains("# n_info_bits = 1000\n"));
    assert_eq!(body(&text).len(), 1);
}

#[test]
fn binary_reruns_are_byte_identical() {
    let exe = env!("CARGO_BIN_EXE_dbmc");
    let outputs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            Command::new(exe)
                .args(["sweep-snr", "--quick", "--set", "snr_grid=0,12"])
                .output()
                .unwrap()
                .stdout
        })
        .collect();
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
}
