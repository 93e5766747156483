#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_moodkappa"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn run_with_threads(args: &[&str], threads: usize) -> Output {
    bin()
        .args(args)
        .env("MOODKAPPA_THREADS", threads.to_string())
        .output()
        .expect("binary runs")
}

pub fn sha256(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).unwrap();
    Sha256::digest(&bytes).iter().fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

pub const FIXTURE_MAPPING: &str = r#"
id_col = "respondent"
computer_scientist_col = "is_cs"
programming_experience_col = "has_programmed"
label_col_template = "stmt_{i}"
statements = 100

[encodings]
positive = ["Positive"]
neutral = ["Neutral"]
negative = ["Negative"]
missing = ["-"]
"#;

/// Raw survey export with the given respondent mix: `screened` fail the
/// screening questions, `incomplete` skip one statement, `clean` answer all.
pub fn fixture_raw(screened: usize, incomplete: usize, clean: usize) -> String {
    let mut out = String::from("respondent,is_cs,has_programmed");
    for i in 1..=100 {
        write!(out, ",stmt_{i}").unwrap();
    }
    out.push('\n');
    let tokens = ["Positive", "Neutral", "Negative"];
    let total = screened + incomplete + clean;
    for r in 0..total {
        let (cs, prog) = if r < screened {
            if r % 2 == 0 { ("No", "Yes") } else { ("Yes", "No") }
        } else {
            ("Yes", "Yes")
        };
        let skip = r >= screened && r < screened + incomplete;
        write!(out, "R{r:03},{cs},{prog}").unwrap();
        for i in 0..100 {
            let cell = if skip && i == r % 100 { "-" } else { tokens[(r * 31 + i * 7 + i * i) % 3] };
            write!(out, ",{cell}").unwrap();
        }
        out.push('\n');
    }
    out
}
