//! Energy-ledger CSV files.

use std::fmt::Write as _;
use std::path::Path;

use crate::diagnostics::EnergyRecord;
use crate::error::{Result, VmsError};

pub const LEDGER_HEADER: &str = "t,ke_fe,ke_sub,visc_diss,sub_diss,power_in,jump_terms,imbalance";

/// Default relative tolerance of [`check_ledger`].
pub const CHECK_TOL: f64 = 1e-10;

fn fields(r: &EnergyRecord) -> [f64; 8] {
    [
        r.t,
        r.ke_fe,
        r.ke_sub,
        r.visc_diss,
        r.sub_diss,
        r.power_in,
        r.jump_terms,
        r.imbalance,
    ]
}

/// CSV text, 17 significant digits per value.
pub fn ledger_to_csv(rows: &[EnergyRecord]) -> String {
    let mut s = String::with_capacity(64 + rows.len() * 200);
    s.push_str(LEDGER_HEADER);
    s.push('\n');
    for r in rows {
        let f = fields(r);
        for (i, v) in f.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v:.16e}");
        }
        s.push('\n');
    }
    s
}

pub fn write_ledger(path: &Path, rows: &[EnergyRecord]) -> Result<()> {
    std::fs::write(path, ledger_to_csv(rows)).map_err(|e| VmsError::io(path, e))
}

pub fn read_ledger(path: &Path) -> Result<Vec<EnergyRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| VmsError::io(path, e))?;
    parse_ledger(&text, path)
}

pub fn parse_ledger(text: &str, path: &Path) -> Result<Vec<EnergyRecord>> {
    let parse_err = |line: usize, msg: String| VmsError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == LEDGER_HEADER => {}
        Some((_, h)) => return Err(parse_err(1, format!("bad header `{h}`"))),
        None => return Err(parse_err(1, "empty ledger".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(i + 1, e.to_string()))?;
        if vals.len() != 8 {
            return Err(parse_err(i + 1, format!("expected 8 columns, found {}", vals.len())));
        }
        rows.push(EnergyRecord {
            t: vals[0],
            ke_fe: vals[1],
            ke_sub: vals[2],
            visc_diss: vals[3],
            sub_diss: vals[4],
            power_in: vals[5],
            jump_terms: vals[6],
            imbalance: vals[7],
        });
    }
    Ok(rows)
}

/// Outcome of re-verifying a ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerCheck {
    pub rows: usize,
    /// Largest relative imbalance seen (stored or recomputed).
    pub worst: f64,
    /// 1-based data rows that failed, with a reason.
    pub failures: Vec<(usize, String)>,
}

impl LedgerCheck {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Recomputes the imbalance of every row from its predecessor and flags
/// rows whose stored or recomputed imbalance exceeds `tol` relative to the
/// row's scale, disagree with each other, have negative dissipation or
/// break the time ordering. The first row has no predecessor; only its
/// stored imbalance is checked.
pub fn check_ledger(rows: &[EnergyRecord], tol: f64) -> LedgerCheck {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (i, r) in rows.iter().enumerate() {
        let row = i + 1;
        if fields(r).iter().any(|v| !v.is_finite()) {
            failures.push((row, "non-finite value".into()));
            continue;
        }
        if r.visc_diss < 0.0 || r.sub_diss < 0.0 || r.jump_terms < 0.0 {
            failures.push((row, "negative dissipation".into()));
        }
        let dt = if i > 0 {
            r.t - rows[i - 1].t
        } else if rows.len() > 1 {
            rows[1].t - r.t
        } else {
            r.t.abs()
        };
        if i > 0 && dt <= 0.0 {
            failures.push((row, format!("time not increasing ({} after {})", r.t, rows[i - 1].t)));
            continue;
        }
        let scale = r.scale(dt);
        let stored = r.imbalance.abs() / scale;
        worst = worst.max(stored);
        if stored > tol {
            failures.push((row, format!("stored imbalance {:e} exceeds tolerance", stored)));
        }
        if i > 0 {
            let again = r.recompute_imbalance(&rows[i - 1]);
            let rel = again.abs() / scale;
            worst = worst.max(rel);
            if rel > tol {
                failures.push((row, format!("recomputed imbalance {:e} exceeds tolerance", rel)));
            } else if (again - r.imbalance).abs() / scale > tol {
                failures.push((row, "stored and recomputed imbalance disagree".into()));
            }
        }
    }
    LedgerCheck {
        rows: rows.len(),
        worst,
        failures,
    }
}
