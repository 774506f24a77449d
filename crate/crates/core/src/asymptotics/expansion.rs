use super::BergmanSeries;
use crate::error::{Error, Result};
use crate::geometry::{GridField, MaskField};
use crate::hilbert::BergmanModel;
use crate::mongeampere::integrate;

#[derive(Debug, Clone, PartialEq)]
pub struct TzcPair {
    pub k: u32,
    /// `2 c_{2k} - c_k` with `c_k = k (k^{-n} B_k / rho - 1)`, per window node.
    pub b_hat: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TzcReport {
    /// Window node indices, aligned with every `b_hat`.
    pub nodes: Vec<usize>,
    pub pairs: Vec<TzcPair>,
    /// Window mean of the estimate from the largest pair.
    pub b1: f64,
    /// Largest node-wise change between the last two estimates, relative
    /// to `|b1|`.
    pub spread: f64,
}

/// Richardson estimate of the first expansion coefficient over the `(k, 2k)`
/// pairs of the series. `rho` is the Monge-Ampere ratio of the weight; the
/// window must sit one node inside the contact set with `rho > margin`.
pub fn tzc_fit(
    series: &BergmanSeries,
    rho: &GridField,
    contact: &MaskField,
    window: &[bool],
    margin: f64,
) -> Result<TzcReport> {
    series.levels[0].log_b.check_same_domain(rho)?;
    if window.len() != rho.len() {
        return Err(Error::DomainMismatch("window length differs from the grid".into()));
    }
    let inner = contact.interior(1);
    let nodes: Vec<usize> = (0..window.len()).filter(|&i| window[i]).collect();
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("empty fit window".into()));
    }
    for &i in &nodes {
        if !inner[i] {
            return Err(Error::WindowTouchesBoundary(i));
        }
        if !(rho.get(i) > margin) {
            return Err(Error::InvalidArgument(format!(
                "curvature ratio {:.3e} at node {i} is below the margin {margin:.3e}",
                rho.get(i)
            )));
        }
    }
    let c = |k: u32| -> Option<Vec<f64>> {
        let lvl = series.level(k)?;
        let kf = k as f64;
        Some(
            nodes
                .iter()
                .map(|&i| kf * (lvl.log_density(series.n, i) - rho.get(i).ln()).exp_m1())
                .collect(),
        )
    };
    let mut pairs = Vec::new();
    for lvl in &series.levels {
        let (Some(a), Some(b)) = (c(lvl.k), c(2 * lvl.k)) else {
            continue;
        };
        let b_hat: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * y - x).collect();
        let mean = b_hat.iter().sum::<f64>() / b_hat.len() as f64;
        pairs.push(TzcPair {
            k: lvl.k,
            b_hat,
            mean,
        });
    }
    let Some(last) = pairs.last() else {
        return Err(Error::InvalidArgument("no (k, 2k) pair in the level list".into()));
    };
    let b1 = last.mean;
    let spread = if pairs.len() < 2 {
        0.0
    } else {
        let prev = &pairs[pairs.len() - 2];
        let d = last
            .b_hat
            .iter()
            .zip(&prev.b_hat)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        d / b1.abs().max(f64::MIN_POSITIVE)
    };
    Ok(TzcReport {
        nodes,
        pairs,
        b1,
        spread,
    })
}

/// `(1 - |z - c|^2 / rho^2)^3` inside the disc, zero outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestBump {
    pub center: [f64; 2],
    pub radius: f64,
}

impl TestBump {
    pub fn value(&self, z: [f64; 2]) -> f64 {
        let dx = z[0] - self.center[0];
        let dy = z[1] - self.center[1];
        let q = 1.0 - (dx * dx + dy * dy) / (self.radius * self.radius);
        if q <= 0.0 {
            0.0
        } else {
            q * q * q
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffDiagReport {
    pub k: u32,
    /// `k^{-1} int int |K(x, y)|^2 f(x) g(y)`.
    pub value: f64,
    /// `int f g dmu_phi`.
    pub target: f64,
}

/// Off-diagonal concentration `k^{-1} tr(A^f A^g)` of a chart model against
/// the equilibrium measure given by `density` on the grid of `reference`.
pub fn offdiag_concentration(
    model: &BergmanModel,
    f: &TestBump,
    g: &TestBump,
    density: &GridField,
    reference: &GridField,
) -> Result<OffDiagReport> {
    let af = model.moment_matrix(|z| f.value(z))?;
    let ag = model.moment_matrix(|z| g.value(z))?;
    let value = (&af * &ag).trace().re / model.k() as f64;
    let d = density.domain();
    let fg = GridField::from_fn(d.clone(), |i| {
        let z = d.point(i);
        f.value(z) * g.value(z) * density.get(i)
    })?;
    Ok(OffDiagReport {
        k: model.k(),
        value,
        target: integrate(&fg, reference)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TchebishevRow {
    pub k: u32,
    /// `(min B_k)^{1/k}` over the grid.
    pub estimate: f64,
    pub rel_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TchebishevReport {
    pub rows: Vec<TchebishevRow>,
    /// `exp(2 x_{2k} - x_k)` with `x_k = ln(min B_k) / k` on the largest pair.
    pub extrapolated: Option<f64>,
    /// `exp(-sup(phi - phi_e))`.
    pub target: f64,
    /// `exp(-sup(phi_e - phi))`, which is identically one.
    pub printed_form: f64,
    /// The two forms differ.
    pub sign_discrepancy: bool,
}

/// Capacity limit `(inf B_k)^{1/k} -> exp(-sup(phi - phi_e))`.
pub fn tchebishev_estimate(
    series: &BergmanSeries,
    phi: &GridField,
    phi_e: &GridField,
) -> Result<TchebishevReport> {
    phi.check_same_domain(phi_e)?;
    series.levels[0].log_b.check_same_domain(phi)?;
    let defect = phi.sub(phi_e)?;
    let target = (-defect.max()).exp();
    let printed_form = (-(-defect.min())).exp().min(1.0);
    let x = |k: u32| series.level(k).map(|l| l.log_b.min() / k as f64);
    let rows = series
        .levels
        .iter()
        .map(|l| {
            let estimate = (l.log_b.min() / l.k as f64).exp();
            TchebishevRow {
                k: l.k,
                estimate,
                rel_gap: (estimate - target).abs() / target,
            }
        })
        .collect();
    let extrapolated = series
        .levels
        .iter()
        .rev()
        .find_map(|l| Some((x(l.k)?, x(2 * l.k)?)))
        .map(|(a, b)| (2.0 * b - a).exp());
    Ok(TchebishevReport {
        rows,
        extrapolated,
        target,
        printed_form,
        sign_discrepancy: (printed_form - target).abs() > 1e-12,
    })
}
