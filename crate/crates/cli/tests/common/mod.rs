#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn scenario(name: &str) -> String {
    workspace()
        .join("scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

pub fn dcfwb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcfwb"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout_ok(args: &[&str]) -> String {
    let out = dcfwb(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 csv")
}

/// Parsed CSV: header plus rows of raw fields.
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn parse(text: &str) -> Csv {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader
            .headers()
            .expect("header")
            .iter()
            .map(str::to_owned)
            .collect();
        let rows = reader
            .records()
            .map(|r| {
                r.expect("well-formed row")
                    .iter()
                    .map(str::to_owned)
                    .collect()
            })
            .collect();
        Csv { header, rows }
    }

    pub fn col(&self, name: &str) -> usize {
        self.header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name}"))
    }

    pub fn f(&self, row: usize, name: &str) -> f64 {
        self.rows[row][self.col(name)].parse().expect("number")
    }

    pub fn s(&self, row: usize, name: &str) -> &str {
        &self.rows[row][self.col(name)]
    }
}
