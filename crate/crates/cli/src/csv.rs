//! Deterministic CSV: 17 significant digits, `\n` line endings, config echoed as `#` comments.

use std::fmt::Write;

use crate::config::ExperimentConfig;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Csv {
    text: String,
}

impl Csv {
    /// Starts the comment block. Add further comments, then [`Csv::columns`].
    pub fn new(config: &ExperimentConfig) -> Self {
        let mut text = format!("# qchain {}\n", env!("CARGO_PKG_VERSION"));
        for line in config.to_toml().lines() {
            if line.is_empty() {
                text.push_str("#\n");
            } else {
                let _ = writeln!(text, "# {line}");
            }
        }
        Self { text }
    }

    pub fn columns<S: AsRef<str>>(&mut self, names: &[S]) {
        let names: Vec<&str> = names.iter().map(AsRef::as_ref).collect();
        self.text.push_str(&names.join(","));
        self.text.push('\n');
    }

    pub fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    pub fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&x| num(x)).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn labelled(&mut self, label: &str, value: f64) {
        let _ = writeln!(self.text, "{label},{}", num(value));
    }

    pub fn finish(self) -> String {
        self.text
    }
}
