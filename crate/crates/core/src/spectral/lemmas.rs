//! Measured constants of the star space: inf-sup, projection stability,
//! inverse inequality and norm equivalence on the solenoidal subspace.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, VmsError};
use crate::mesh::{build_structured, BoxDomain};
use crate::spectral::spectrum::{decompose_dense, par, Spectrum, DENSE_CAP};
use crate::spectral::star::StarSpace;

/// Exponents probed by the suite before clipping to each range.
pub const S_GRID: [f64; 10] = [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0];

fn smallest_eigenvalue(a: &Mat<f64>) -> Result<f64> {
    let n = a.nrows();
    let sym = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let ev = sym
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| VmsError::Solver(format!("eigenvalues: {e:?}")))?;
    Ok(ev.first().copied().unwrap_or(0.0))
}

/// Precomputed pieces of the discrete inf-sup quotient on one mesh.
pub struct InfSupLab {
    h: f64,
    /// `B_h Phi`, the resolved coupling in the Laplacian eigenbasis.
    coupling_modes: Mat<f64>,
    fe_eigenvalues: Vec<f64>,
    /// `B_E M_E^-1 B_E^T - B_h M_h^-1 B_h^T`, the coupling through the
    /// orthogonal remainder.
    complement: Mat<f64>,
    /// Nonconstant pressure modes.
    pressure_modes: Mat<f64>,
    pressure_eigenvalues: Vec<f64>,
}

impl InfSupLab {
    pub fn new(star: &StarSpace) -> Result<Self> {
        let nfe = star.n_fe();
        let np = star.pressure.n_dofs();
        if star.n_e() > DENSE_CAP {
            return Err(VmsError::Size { size: star.n_e(), cap: DENSE_CAP });
        }
        let fe = star.fe_spectrum()?;
        let be = star.coupling_e.to_dense();
        let bh = &be * star.embed.to_dense();
        let coupling_modes = &bh * &fe.eigenvectors;
        let full = &be * star.mass_e_solve_mat(&be.transpose().to_owned());
        let resolved = &bh * star.mass_fe_solve_mat(&bh.transpose().to_owned());
        let complement = Mat::<f64>::from_fn(np, np, |i, j| full[(i, j)] - resolved[(i, j)]);
        let ps = star.pressure_spectrum()?;
        // drop the constant mode, the one of smallest magnitude
        let skip = (0..np)
            .min_by(|&a, &b| ps.eigenvalues[a].abs().total_cmp(&ps.eigenvalues[b].abs()))
            .unwrap_or(0);
        let keep: Vec<usize> = (0..np).filter(|&i| i != skip).collect();
        let pressure_modes = Mat::<f64>::from_fn(np, keep.len(), |r, c| ps.eigenvectors[(r, keep[c])]);
        let pressure_eigenvalues = keep.iter().map(|&i| ps.eigenvalues[i]).collect();
        debug_assert_eq!(coupling_modes.ncols(), nfe);
        Ok(InfSupLab {
            h: star.h,
            coupling_modes,
            fe_eigenvalues: fe.eigenvalues,
            complement,
            pressure_modes,
            pressure_eigenvalues,
        })
    }

    /// `min_q sup_w (grad q, w) / (|w|_{1-s} |q|_s)`; without the remainder
    /// block the supremum runs over the resolved space only.
    pub fn beta(&self, s: f64, with_complement: bool) -> Result<f64> {
        let t = 1.0 - s;
        let np = self.coupling_modes.nrows();
        let nfe = self.coupling_modes.ncols();
        let scaled = Mat::<f64>::from_fn(np, nfe, |r, c| {
            self.coupling_modes[(r, c)] * self.fe_eigenvalues[c].powf(-0.5 * t)
        });
        let mut z = &scaled * scaled.transpose();
        if with_complement {
            let w = self.h.powf(2.0 * t);
            for i in 0..np {
                for j in 0..np {
                    z[(i, j)] += w * self.complement[(i, j)];
                }
            }
        }
        let y = self.pressure_modes.transpose() * &z * &self.pressure_modes;
        let m = y.nrows();
        let mu = &self.pressure_eigenvalues;
        let yy = Mat::<f64>::from_fn(m, m, |i, j| y[(i, j)] * mu[i].powf(-0.5 * s) * mu[j].powf(-0.5 * s));
        Ok(smallest_eigenvalue(&yy)?.max(0.0).sqrt())
    }
}

/// Convenience wrapper building the lab for a single exponent.
pub fn infsup_constant(star: &StarSpace, s: f64, with_complement: bool) -> Result<f64> {
    InfSupLab::new(star)?.beta(s, with_complement)
}

/// Seeded random elements of the enriched space.
pub fn random_probes(star: &StarSpace, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..star.n_e()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// Largest `|P v|_{W^s} / |v|_{W^s}` over the probes, `P` the L2 projection
/// onto the discretely solenoidal subspace.
pub fn leray_star_stability(star: &StarSpace, probes: &[Vec<f64>], s: f64, fe_spec: &Spectrum) -> Result<f64> {
    let leray = star.leray()?;
    let mut worst: f64 = 0.0;
    for v in probes {
        let pv = leray.apply(v);
        let den = star.norm(v, s, fe_spec);
        if den > 0.0 {
            worst = worst.max(star.norm(&pv, s, fe_spec) / den);
        }
    }
    Ok(worst)
}

/// Ritz projection onto the solenoidal subspace in the stabilized energy
/// inner product, with a zero-mean pressure multiplier.
pub fn ritz_projection(star: &StarSpace, v: &[f64]) -> Result<Vec<f64>> {
    let ne = star.n_e();
    let np = star.pressure.n_dofs();
    let n = ne + np + 1;
    if n > DENSE_CAP {
        return Err(VmsError::Size { size: n, cap: DENSE_CAP });
    }
    let a = star.explicit_operator();
    let b = star.coupling_e.to_dense();
    let m = star.pressure.mean_weights();
    let mut sys = Mat::<f64>::zeros(n, n);
    for i in 0..ne {
        for j in 0..ne {
            sys[(i, j)] = a[(i, j)];
        }
    }
    for p in 0..np {
        for i in 0..ne {
            sys[(i, ne + p)] = b[(p, i)];
            sys[(ne + p, i)] = b[(p, i)];
        }
        sys[(ne + p, ne + np)] = m[p];
        sys[(ne + np, ne + p)] = m[p];
    }
    let mut rhs = Mat::<f64>::zeros(n, 1);
    for i in 0..ne {
        rhs[(i, 0)] = (0..ne).map(|j| a[(i, j)] * v[j]).sum();
    }
    use faer::linalg::solvers::Solve;
    let x = sys.partial_piv_lu().solve(&rhs);
    Ok((0..ne).map(|i| x[(i, 0)]).collect())
}

/// `max_i (1 + lambda_i)^(1/2) / lambda_i^(s/2) * h^(1-s)`.
pub fn inverse_inequality_constant(spec: &Spectrum, s: f64, h: f64) -> f64 {
    spec.eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| (1.0 + l).sqrt() / l.powf(0.5 * s))
        .fold(0.0, f64::max)
        * h.powf(1.0 - s)
}

/// Mass-orthonormal basis (columns) of the solenoidal subspace of the
/// enriched space.
pub fn solenoidal_basis(star: &StarSpace) -> Result<Mat<f64>> {
    let ne = star.n_e();
    if ne > DENSE_CAP {
        return Err(VmsError::Size { size: ne, cap: DENSE_CAP });
    }
    let b = star.coupling_e.to_dense();
    let btb = b.transpose() * &b;
    let evd = btb
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| VmsError::Solver(format!("null space: {e:?}")))?;
    let ev: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let top = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let null: Vec<usize> = (0..ne).filter(|&i| ev[i].abs() <= 1e-10 * top).collect();
    let expected = ne - (star.pressure.n_dofs() - 1);
    if null.len() != expected {
        return Err(VmsError::Invariant(format!(
            "solenoidal subspace has dimension {} (expected {expected})",
            null.len()
        )));
    }
    let u = evd.U();
    let nb = Mat::<f64>::from_fn(ne, null.len(), |r, c| u[(r, null[c])]);
    let g = nb.transpose() * star.mass_e.to_dense() * &nb;
    let llt = g
        .llt(Side::Lower)
        .map_err(|_| VmsError::Solver("solenoidal Gram matrix is not positive definite".into()))?;
    // Z^T = L^-1 N^T
    let mut zt = nb.transpose().to_owned();
    solve_lower_triangular_in_place(llt.L(), zt.as_mut(), par());
    Ok(zt.transpose().to_owned())
}

/// Extremal ratios `|v|_{V^s} / |v|_{W^s}` over the solenoidal subspace for
/// every `s`, where the V-norm uses powers of the stabilized operator
/// restricted to that subspace.
pub fn wv_equivalence(star: &StarSpace, s_values: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    let a = star.explicit_operator();
    let me = star.mass_e.to_dense();
    let w_spec = decompose_dense("star", a.as_ref(), me.as_ref(), DENSE_CAP)?;
    let z = solenoidal_basis(star)?;
    let k = z.ncols();
    let av = z.transpose() * &a * &z;
    let eye = Mat::<f64>::identity(k, k);
    let v_spec = decompose_dense("solenoidal", av.as_ref(), eye.as_ref(), DENSE_CAP)?;
    let mut out = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let vs = v_spec.gram(s);
        let ws = z.transpose() * w_spec.gram(s) * &z;
        let ratio = decompose_dense("ratio", vs.as_ref(), ws.as_ref(), DENSE_CAP)?;
        let lo = ratio.eigenvalues.first().copied().unwrap_or(1.0).max(0.0).sqrt();
        let hi = ratio.eigenvalues.last().copied().unwrap_or(1.0).max(0.0).sqrt();
        out.push((s, lo, hi));
    }
    Ok(out)
}

/// Largest relative gap between the block evaluation of the star norm and
/// the spectral evaluation through the explicit operator.
pub fn star_norm_gap(star: &StarSpace, probes: &[Vec<f64>], s_values: &[f64]) -> Result<f64> {
    let fe = star.fe_spectrum()?;
    let explicit = star.explicit_spectrum()?;
    let mut worst: f64 = 0.0;
    for w in probes {
        for &s in s_values {
            let block = star.norm(w, s, &fe);
            let direct = crate::spectral::fractional_norm(w, s, &explicit);
            worst = worst.max((block - direct).abs() / direct.max(1e-300));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceRow {
    pub lemma: String,
    pub s: f64,
    pub level: usize,
    pub h: f64,
    pub value: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
}

pub const REPORT_HEADER: &str = "lemma,s,level,h,value,ratio_min,ratio_max";

impl EquivalenceReport {
    #[allow(clippy::too_many_arguments)]
    pub fn push(&mut self, lemma: &str, s: f64, level: usize, h: f64, value: f64, lo: f64, hi: f64) {
        self.rows.push(EquivalenceRow {
            lemma: lemma.to_string(),
            s,
            level,
            h,
            value,
            ratio_min: lo,
            ratio_max: hi,
        });
    }

    fn select(&self, lemma: &str, s: f64) -> impl Iterator<Item = &EquivalenceRow> {
        let lemma = lemma.to_string();
        self.rows.iter().filter(move |r| r.lemma == lemma && r.s == s)
    }

    /// `min / max` of `value` across levels.
    pub fn spread(&self, lemma: &str, s: f64) -> Option<f64> {
        spread(self.select(lemma, s).map(|r| r.value))
    }

    /// Spreads of `ratio_min` and `ratio_max` across levels.
    pub fn ratio_spreads(&self, lemma: &str, s: f64) -> Option<(f64, f64)> {
        Some((
            spread(self.select(lemma, s).map(|r| r.ratio_min))?,
            spread(self.select(lemma, s).map(|r| r.ratio_max))?,
        ))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:?},{},{:?},{:?},{:?},{:?}",
                r.lemma, r.s, r.level, r.h, r.value, r.ratio_min, r.ratio_max
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| VmsError::io(path, e))
    }

    pub fn all_finite_positive(&self) -> bool {
        self.rows
            .iter()
            .all(|r| [r.value, r.ratio_min, r.ratio_max].iter().all(|v| v.is_finite() && *v >= 0.0))
    }
}

fn spread(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(if hi > 0.0 { lo / hi } else { 1.0 })
}

/// Runs every measurement on the structured unit-box meshes with
/// `base_n * 2^k` cells per side, `k < levels`.
pub fn spectra_suite(dim: usize, base_n: usize, levels: usize, seed: u64) -> Result<EquivalenceReport> {
    let mut report = EquivalenceReport::default();
    for level in 0..levels {
        let n = base_n << level;
        let mesh = Arc::new(build_structured(dim, n, BoxDomain::unit())?);
        let star = StarSpace::new(mesh)?;
        let h = star.h;
        let fe = star.fe_spectrum()?;
        let probes = random_probes(&star, 10, seed + level as u64);
        for &s in &S_GRID {
            let gap = star_norm_gap(&star, &probes, &[s])?;
            report.push("star_norm", s, level, h, gap, gap, gap);
        }
        let lab = InfSupLab::new(&star)?;
        for &s in S_GRID.iter().filter(|s| (0.0..=1.0).contains(*s)) {
            let b = lab.beta(s, true)?;
            report.push("infsup", s, level, h, b, b, b);
            let b0 = lab.beta(s, false)?;
            report.push("infsup_resolved", s, level, h, b0, b0, b0);
            let c = inverse_inequality_constant(&fe, s, h);
            report.push("inverse", s, level, h, c, c, c);
        }
        for &s in S_GRID.iter().filter(|s| (0.0..0.5).contains(*s)) {
            let r = leray_star_stability(&star, &probes, s, &fe)?;
            report.push("leray", s, level, h, r, r, r);
        }
        let ws: Vec<f64> = S_GRID.iter().copied().filter(|s| *s > -0.5 && *s < 2.0).collect();
        for (s, lo, hi) in wv_equivalence(&star, &ws)? {
            report.push("wv_equivalence", s, level, h, lo, lo, hi);
        }
    }
    Ok(report)
}
