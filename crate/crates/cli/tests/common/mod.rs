#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bspnn_cli::config::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const CLUSTER_NAMES: [&str; 22] = [
    "back", "buffer_overflow", "loadmodule", "perl", "rootkit", "ftp_write", "warezclient", "warezmaster",
    "guess_passwd", "imap", "land", "portsweep", "satan", "ipsweep", "nmap", "multihop", "neptune", "phf", "pod",
    "teardrop", "spy", "smurf",
];

fn category_of(name: &str) -> usize {
    match name {
        "normal" => 0,
        "ipsweep" | "nmap" | "portsweep" | "satan" | "mscan" | "saint" => 1,
        "back" | "land" | "neptune" | "pod" | "smurf" | "teardrop" | "apache2" | "mailbomb" => 2,
        "buffer_overflow" | "loadmodule" | "perl" | "rootkit" | "ps" | "xterm" => 3,
        _ => 4,
    }
}

/// One KDD-format line for `name`: category-specific shifts on a few
/// continuous columns and a category-specific protocol, plus noise.
pub fn line(name: &str, rng: &mut ChaCha8Rng) -> String {
    let noise = Normal::new(0.0, 0.3).unwrap();
    let c = category_of(name);
    let protocols = ["tcp", "icmp", "udp", "tcp", "tcp"];
    let services = ["http", "private", "ftp_data", "telnet", "ftp"];
    let flags = ["SF", "REJ", "S0", "RSTO", "SF"];
    let mut out = String::new();
    for col in 0..41 {
        match col {
            1 => out.push_str(protocols[c]),
            2 => out.push_str(services[(c + rng.random_range(0..2)) % services.len()]),
            3 => out.push_str(flags[c]),
            _ => {
                let shift = if col == 4 + 2 * c || col == 5 + 2 * c { 4.0 } else { 0.0 };
                let v: f64 = shift + noise.sample(rng);
                let _ = write!(out, "{v:.4}");
            }
        }
        out.push(',');
    }
    out.push_str(name);
    out.push('.');
    out
}

/// Writes `per_name` records for every listed name, interleaved.
pub fn write_kdd(path: &Path, names: &[&str], per_name: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    for _ in 0..per_name {
        for name in names {
            text.push_str(&line(name, &mut rng));
            text.push('\n');
        }
    }
    std::fs::write(path, text).unwrap();
}

pub fn train_names() -> Vec<&'static str> {
    let mut v = vec!["normal", "normal", "normal"];
    v.extend(CLUSTER_NAMES);
    v
}

/// A small train/test pair plus a config pointing at them.
pub fn fixture(dir: &Path) -> RunConfig {
    let train = dir.join("train.data");
    let test = dir.join("test.data");
    write_kdd(&train, &train_names(), 6, 1);
    let mut test_names = train_names();
    test_names.push("apache2");
    write_kdd(&test, &test_names, 3, 2);
    let mut config = RunConfig::default();
    config.paths.train_file = Some(train);
    config.paths.test_file = Some(test);
    config.out_dir = dir.join("out");
    config.seed = 7;
    config.boost.rounds = 3;
    config
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_bspnn"))
}
