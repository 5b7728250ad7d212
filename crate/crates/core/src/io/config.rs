//! Scenario configuration: flat `section.key = value` lines.
//!
//! ```text
//! # comment
//! mesh.dim = 2
//! mesh.n = 16
//! [physics]          # optional header, prefixes the keys below it
//! nu = 0.01
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Result, VmsError};
use crate::fields::{Forcing, InitialCondition};
use crate::mesh::BoxDomain;
use crate::solver::SolveConfig;
use crate::subgrid::StabParams;

/// Every accepted key with its default (`None` = required).
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("mesh.dim", Some("2")),
    ("mesh.n", None),
    ("mesh.box", Some("unit")),
    ("physics.nu", None),
    ("physics.forcing", Some("zero")),
    ("physics.forcing_value", Some("0,0,0")),
    ("physics.initial", Some("vortex")),
    ("physics.convection", Some("true")),
    ("stab.C_s", Some("4")),
    ("stab.C_c", Some("2")),
    ("time.dt", None),
    ("time.T", None),
    ("time.snapshot_every", Some("1")),
    ("solver.picard_tol", Some("1e-10")),
    ("solver.picard_max", Some("50")),
    ("solver.linear_tol", Some("1e-10")),
    ("output.dir", Some("out")),
    ("output.formats", Some("csv,vtk")),
];

/// Largest accepted `mesh.n`.
pub const MAX_CELLS_PER_SIDE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Vtk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub dim: usize,
    pub n: usize,
    pub domain: BoxDomain,
    pub nu: f64,
    pub forcing: Forcing,
    pub initial: InitialCondition,
    pub convection: bool,
    pub c_s: f64,
    pub c_c: f64,
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_every: usize,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub linear_tol: f64,
    pub out_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl ScenarioConfig {
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            dt: self.dt,
            t_final: self.t_final,
            picard_tol: self.picard_tol,
            picard_max: self.picard_max,
            linear_tol: self.linear_tol,
            convection: self.convection,
        }
    }

    pub fn stab_params(&self) -> StabParams {
        StabParams {
            nu: self.nu,
            c_s: self.c_s,
            c_c: self.c_c,
            ..StabParams::default()
        }
    }

    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| VmsError::io(path, e))?;
    parse_config_str(&text, path)
}

/// Parses and validates, reporting every problem found rather than the first.
pub fn parse_config_str(text: &str, path: &Path) -> Result<ScenarioConfig> {
    let mut errs: Vec<String> = Vec::new();
    let mut raw: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut section = String::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = strip_comment(line).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => section = format!("{}.", name.trim()),
                _ => errs.push(format!("{}:{lineno}: malformed section header", path.display())),
            }
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errs.push(format!("{}:{lineno}: expected `key = value`", path.display()));
            continue;
        };
        let key = format!("{section}{}", k.trim());
        let value = unquote(v.trim()).to_string();
        if !KEYS.iter().any(|(name, _)| *name == key) {
            errs.push(format!("{}:{lineno}: unknown key `{key}`{}", path.display(), suggest(&key)));
            continue;
        }
        if raw.insert(key.clone(), (lineno, value)).is_some() {
            errs.push(format!("{}:{lineno}: duplicate key `{key}`", path.display()));
        }
    }
    for (name, default) in KEYS {
        if default.is_none() && !raw.contains_key(*name) {
            errs.push(format!("{}: missing required key `{name}`", path.display()));
        }
    }
    let mut r = Reader {
        raw: &raw,
        errs: &mut errs,
        path,
    };
    let dim = r.get("mesh.dim", 2usize);
    let n = r.get("mesh.n", 1usize);
    let domain = r.domain(dim);
    let nu = r.get("physics.nu", 1.0f64);
    let convection = r.get("physics.convection", true);
    let forcing_value = r.vector("physics.forcing_value");
    let forcing = match r.text("physics.forcing").as_str() {
        "zero" => Forcing::Zero,
        "constant" => Forcing::Constant(forcing_value),
        "manufactured" => Forcing::Manufactured { nu, convection },
        other => {
            r.fail("physics.forcing", &format!("expected zero|constant|manufactured, got `{other}`"));
            Forcing::Zero
        }
    };
    let initial = match r.text("physics.initial").as_str() {
        "zero" => InitialCondition::Zero,
        "vortex" => InitialCondition::Vortex,
        "manufactured" => InitialCondition::Manufactured,
        other => {
            r.fail("physics.initial", &format!("expected zero|vortex|manufactured, got `{other}`"));
            InitialCondition::Zero
        }
    };
    let c_s = r.get("stab.C_s", 4.0f64);
    let c_c = r.get("stab.C_c", 2.0f64);
    let dt = r.get("time.dt", 0.01f64);
    let t_final = r.get("time.T", 0.0f64);
    let snapshot_every = r.get("time.snapshot_every", 1usize);
    let picard_tol = r.get("solver.picard_tol", 1e-10f64);
    let picard_max = r.get("solver.picard_max", 50usize);
    let linear_tol = r.get("solver.linear_tol", 1e-10f64);
    let out_dir = PathBuf::from(r.text("output.dir"));
    let mut formats = Vec::new();
    for f in r.text("output.formats").split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match f {
            "csv" => formats.push(OutputFormat::Csv),
            "vtk" => formats.push(OutputFormat::Vtk),
            other => r.fail("output.formats", &format!("unknown format `{other}` (csv, vtk)")),
        }
    }

    if !(dim == 2 || dim == 3) {
        r.fail("mesh.dim", &format!("must be 2 or 3, got {dim}"));
    }
    if n == 0 || n > MAX_CELLS_PER_SIDE {
        r.fail("mesh.n", &format!("must lie in [1, {MAX_CELLS_PER_SIDE}], got {n}"));
    }
    let positive = |v: f64| v > 0.0 && v.is_finite();
    for (key, v) in [("physics.nu", nu), ("stab.C_s", c_s), ("time.dt", dt)] {
        if !positive(v) {
            r.fail(key, &format!("must be positive, got {v}"));
        }
    }
    if !(c_c >= 0.0 && c_c.is_finite()) {
        r.fail("stab.C_c", &format!("must be nonnegative, got {c_c}"));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        r.fail("time.T", &format!("must be nonnegative, got {t_final}"));
    }
    if snapshot_every == 0 {
        r.fail("time.snapshot_every", "must be at least 1");
    }
    for (key, v) in [("solver.picard_tol", picard_tol), ("solver.linear_tol", linear_tol)] {
        if !(v > 0.0 && v < 1.0) {
            r.fail(key, &format!("must lie in (0, 1), got {v}"));
        }
    }
    if picard_max == 0 {
        r.fail("solver.picard_max", "must be at least 1");
    }
    let manufactured = matches!(forcing, Forcing::Manufactured { .. }) || initial == InitialCondition::Manufactured;
    if manufactured && (dim != 2 || domain != BoxDomain::unit()) {
        r.fail("physics.forcing", "the manufactured solution is defined on the 2D unit square only");
    }

    if !errs.is_empty() {
        return Err(VmsError::Config(errs.join("\n")));
    }
    Ok(ScenarioConfig {
        dim,
        n,
        domain,
        nu,
        forcing,
        initial,
        convection,
        c_s,
        c_c,
        dt,
        t_final,
        snapshot_every,
        picard_tol,
        picard_max,
        linear_tol,
        out_dir,
        formats,
    })
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(a, _)| a)
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

fn suggest(key: &str) -> String {
    let best = KEYS
        .iter()
        .map(|(k, _)| {
            let leaf = k.rsplit('.').next().unwrap_or(k).to_lowercase();
            let given = key.to_lowercase();
            let given_leaf = given.rsplit('.').next().unwrap_or(&given);
            let score = strsim::jaro_winkler(&given, &k.to_lowercase()).max(strsim::jaro_winkler(given_leaf, &leaf));
            (score, *k)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((score, k)) if score > 0.6 => format!(" (did you mean `{k}`?)"),
        _ => String::new(),
    }
}

struct Reader<'a> {
    raw: &'a BTreeMap<String, (usize, String)>,
    errs: &'a mut Vec<String>,
    path: &'a Path,
}

impl Reader<'_> {
    fn text(&self, key: &str) -> String {
        match self.raw.get(key) {
            Some((_, v)) => v.clone(),
            None => default_of(key).unwrap_or_default().to_string(),
        }
    }

    fn fail(&mut self, key: &str, msg: &str) {
        let loc = match self.raw.get(key) {
            Some((line, _)) => format!("{}:{line}", self.path.display()),
            None => format!("{}", self.path.display()),
        };
        self.errs.push(format!("{loc}: `{key}` {msg}"));
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str, fallback: T) -> T {
        let text = self.text(key);
        match text.parse() {
            Ok(v) => v,
            Err(_) => {
                if self.raw.contains_key(key) {
                    self.fail(key, &format!("cannot parse `{text}`"));
                }
                fallback
            }
        }
    }

    fn vector(&mut self, key: &str) -> [f64; 3] {
        let text = self.text(key);
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let mut out = [0.0; 3];
        if parts.len() > 3 {
            self.fail(key, "takes at most three components");
            return out;
        }
        for (slot, p) in out.iter_mut().zip(&parts) {
            match p.parse::<f64>() {
                Ok(v) if v.is_finite() => *slot = v,
                _ => {
                    self.fail(key, &format!("cannot parse component `{p}`"));
                    return [0.0; 3];
                }
            }
        }
        out
    }

    /// `unit` or `x0,x1,y0,y1[,z0,z1]`.
    fn domain(&mut self, dim: usize) -> BoxDomain {
        let text = self.text("mesh.box");
        if text == "unit" {
            return BoxDomain::unit();
        }
        let vals: std::result::Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let Ok(vals) = vals else {
            self.fail("mesh.box", &format!("cannot parse `{text}`"));
            return BoxDomain::unit();
        };
        if vals.len() != 2 * dim {
            self.fail("mesh.box", &format!("needs {} numbers for dimension {dim}", 2 * dim));
            return BoxDomain::unit();
        }
        let mut d = BoxDomain::unit();
        for k in 0..dim {
            d.lo[k] = vals[2 * k];
            d.hi[k] = vals[2 * k + 1];
            if !(d.hi[k] > d.lo[k] && d.lo[k].is_finite() && d.hi[k].is_finite()) {
                self.fail("mesh.box", &format!("empty extent along axis {k}"));
            }
        }
        d
    }
}

fn default_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _)| *k == key).and_then(|(_, d)| *d)
}

/// Commented template listing every key.
pub fn template() -> String {
    let mut s = String::from("# vmsns scenario\n");
    for (k, d) in KEYS {
        match (k, d) {
            (&"mesh.n", _) => s.push_str("mesh.n = 16\n"),
            (&"physics.nu", _) => s.push_str("physics.nu = 0.01\n"),
            (&"time.dt", _) => s.push_str("time.dt = 0.01\n"),
            (&"time.T", _) => s.push_str("time.T = 0.2\n"),
            (_, Some(v)) => s.push_str(&format!("# {k} = {v}\n")),
            (_, None) => {}
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "mesh.n = 4\nphysics.nu = 0.1\ntime.dt = 0.01\ntime.T = 0.05\n";

    fn parse(t: &str) -> Result<ScenarioConfig> {
        parse_config_str(t, Path::new("test.cfg"))
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!((c.c_s, c.c_c, c.snapshot_every), (4.0, 2.0, 1));
        assert_eq!(c.dim, 2);
        assert_eq!(c.initial, InitialCondition::Vortex);
        assert_eq!(c.formats, vec![OutputFormat::Csv, OutputFormat::Vtk]);
    }

    #[test]
    fn sections_and_comments() {
        let c = parse("[mesh]\nn = 3 # cells\n[physics]\nnu = \"0.5\"\n[time]\ndt=0.1\nT=1\n").unwrap();
        assert_eq!(c.n, 3);
        assert_eq!(c.nu, 0.5);
    }

    #[test]
    fn negative_viscosity_names_key() {
        let e = parse(&MINIMAL.replace("0.1", "-1")).unwrap_err().to_string();
        assert!(e.contains("physics.nu"), "{e}");
    }

    #[test]
    fn unknown_key_gets_suggestion() {
        let e = parse(&format!("{MINIMAL}taau = 1\n")).unwrap_err().to_string();
        assert!(e.contains("unknown key `taau`"), "{e}");
        assert!(e.contains("did you mean"), "{e}");
        let e = parse(&format!("{MINIMAL}physics.nuu = 1\n")).unwrap_err().to_string();
        assert!(e.contains("did you mean `physics.nu`"), "{e}");
    }

    #[test]
    fn all_errors_reported() {
        let e = parse("mesh.n = x\nphysics.nu = -2\nbogus\n").unwrap_err().to_string();
        assert!(e.contains("mesh.n"));
        assert!(e.contains("physics.nu"));
        assert!(e.contains("key = value"));
        assert!(e.contains("time.dt"));
        assert!(e.lines().count() >= 5, "{e}");
    }

    #[test]
    fn template_parses() {
        assert!(parse(&template()).is_ok());
    }

    #[test]
    fn box_parsing() {
        let c = parse(&format!("{MINIMAL}mesh.box = 0,2,-1,1\n")).unwrap();
        assert_eq!(c.domain.hi[0], 2.0);
        assert_eq!(c.domain.lo[1], -1.0);
        assert!(parse(&format!("{MINIMAL}mesh.box = 0,2\n")).is_err());
        assert!(parse(&format!("{MINIMAL}mesh.box = 0,2,-1,1\nphysics.forcing = manufactured\n")).is_err());
    }
}
