//! Result tables: CSV files with a provenance comment and aligned text summaries.

use std::io::Write;

use crate::aggressive::ModeStats;
use crate::diagnostics::DiagnosticsReport;
use crate::error::Result;

/// Columns of the benchmark results file. The last two are filled only when
/// modes are tracked.
pub const RESULTS_HEADER: [&str; 11] = [
    "Distribution",
    "Method",
    "Accept",
    "Min ESS",
    "ESS/Grad",
    "Mix Time",
    "R-hat",
    "Time (s)",
    "Modes",
    "Transitions",
    "Hop Accept",
];

/// Columns of the aggressive suite file.
pub const AGGRESSIVE_HEADER: [&str; 12] = [
    "Config",
    "alpha2",
    "beta2",
    "Modes",
    "Transitions",
    "Mode Mix Time",
    "Autocorr Mix Time",
    "MPL Accept",
    "Hop Accept",
    "Min ESS",
    "Grad Evals",
    "Time (s)",
];

/// Seed, config hash and version written as a `#` comment above the header.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

impl Provenance {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        Self { seed, config_hash: config_hash.into(), version: crate::VERSION.into() }
    }

    pub fn comment(&self) -> String {
        format!("# mplhmc {} seed={} config_sha256={}", self.version, self.seed, self.config_hash)
    }
}

/// `x` with `digits` significant digits; `NaN` and `inf` spelled out.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{:.*e}", digits - 1, x)
    }
}

fn rate(x: f64) -> String {
    format_sig(x, 6)
}

/// One benchmark row.
#[derive(Debug, Clone)]
pub struct ResultRow<'a> {
    pub distribution: String,
    pub method: String,
    pub report: &'a DiagnosticsReport,
    pub wall_seconds: f64,
}

impl ResultRow<'_> {
    pub fn fields(&self) -> Vec<String> {
        let r = self.report;
        let modes = r.mode_stats.as_ref();
        vec![
            self.distribution.clone(),
            self.method.clone(),
            rate(r.accept_rate),
            format!("{:.0}", r.min_ess),
            rate(r.ess_per_grad),
            r.mixing_time.to_string(),
            r.max_rhat.map(rate).unwrap_or_else(|| "NaN".into()),
            format!("{:.3}", self.wall_seconds),
            r.modes_field(),
            modes.map(|m| m.transitions.to_string()).unwrap_or_else(|| "NaN".into()),
            modes.and_then(ModeStats::hop_acceptance).map(rate).unwrap_or_else(|| "NaN".into()),
        ]
    }
}

/// One aggressive-suite row.
#[derive(Debug, Clone)]
pub struct AggressiveRow {
    pub config: String,
    pub alpha2: f64,
    pub beta2: f64,
    pub modes: ModeStats,
    pub autocorr_mixing: usize,
    pub mpl_accept: f64,
    pub min_ess: f64,
    pub grad_evals: usize,
    pub wall_seconds: f64,
}

impl AggressiveRow {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.config.clone(),
            self.alpha2.to_string(),
            self.beta2.to_string(),
            self.modes.modes_field(),
            self.modes.transitions.to_string(),
            rate(self.modes.mode_mixing_time()),
            self.autocorr_mixing.to_string(),
            rate(self.mpl_accept),
            self.modes.hop_acceptance().map(rate).unwrap_or_else(|| "NaN".into()),
            format!("{:.0}", self.min_ess),
            self.grad_evals.to_string(),
            format!("{:.3}", self.wall_seconds),
        ]
    }
}

/// Writes the provenance comment, the header and `rows`.
pub fn write_csv<W: Write>(mut out: W, provenance: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    writeln!(out, "{}", provenance.comment())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Left-aligned first column, right-aligned others, two-space gaps.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, f) in width.iter_mut().zip(r) {
            *w = (*w).max(f.chars().count());
        }
    }
    let line = |fields: Vec<&str>| {
        let mut s = String::new();
        for (i, f) in fields.iter().enumerate().take(cols) {
            if i > 0 {
                s.push_str("  ");
            }
            if i == 0 {
                s.push_str(&format!("{f:<w$}", w = width[i]));
            } else {
                s.push_str(&format!("{f:>w$}", w = width[i]));
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols.saturating_sub(1))));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.014834, 6), "0.0148340");
        assert_eq!(format_sig(0.997, 6), "0.997000");
        assert_eq!(format_sig(123456.7, 6), "123457");
        assert_eq!(format_sig(1.0, 6), "1.00000");
        assert_eq!(format_sig(7e12, 6), "7000000000000");
        assert_eq!(format_sig(3e-9, 3), "3.00e-9");
        assert_eq!(format_sig(f64::INFINITY, 6), "inf");
        assert_eq!(format_sig(f64::NAN, 6), "NaN");
        assert_eq!(format_sig(0.0, 6), "0");
    }

    #[test]
    fn csv_has_provenance_and_header() {
        let mut buf = Vec::new();
        let p = Provenance::new(7, "abc");
        write_csv(&mut buf, &p, &RESULTS_HEADER, &[vec!["x".into(); 11]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("# mplhmc {} seed=7 config_sha256=abc", crate::VERSION));
        assert!(lines.next().unwrap().starts_with("Distribution,Method,Accept,Min ESS,ESS/Grad,Mix Time,R-hat,Time (s),Modes"));
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        assert_eq!(r.records().count(), 1);
    }

    #[test]
    fn table_alignment() {
        let t = render_table(&["a", "bb"], &[vec!["long".into(), "1".into()], vec!["x".into(), "22".into()]]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "a     bb");
        assert_eq!(lines[2], "long   1");
        assert_eq!(lines[3], "x     22");
    }
}
