//! Zero-forcing beams on estimated channels.
//!
//! For a selected set S the beam of the i-th member is the normalized i-th
//! column of `G (G^H G)^-1`, where `G = [h_S(1) .. h_S(|S|), h_10 .. h_L0]`
//! stacks the estimated SU and PR channels. We never form `G^H G`: with
//! `G P = Q R` (column-pivoted QR) the same columns are `Q R^-H`, permuted
//! back by `P`.

use nalgebra::DMatrix;

use crate::channel::CsiView;
use crate::{Cplx, Error, Result};

/// Largest `|r_11| / |r_nn|` accepted before the set is declared singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Unit-norm ZF beams for one selected set.
///
/// Beams carry no canonical phase; consumers only use `|h^H v|`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSet {
    /// Selected SU indices, in beam order.
    pub set: Vec<usize>,
    /// M x |set|, column i is the beam of `set[i]`.
    pub vectors: DMatrix<Cplx>,
    /// Nulls placed by the set that generated these beams (`|S0| - 1 + L`).
    /// A restricted beam set keeps the count of its parent.
    pub null_count: usize,
}

impl BeamSet {
    pub fn empty(antennas: usize) -> Self {
        BeamSet { set: Vec::new(), vectors: DMatrix::zeros(antennas, 0), null_count: 0 }
    }

    pub fn position(&self, user: usize) -> Option<usize> {
        self.set.iter().position(|&u| u == user)
    }

    /// `|h_hat_k^H v_k|^2` for `k` in the set.
    pub fn effective_gain(&self, csi: &CsiView, user: usize) -> Result<f64> {
        let i =
            self.position(user).ok_or_else(|| Error::Usage(format!("SU {user} is not in beam set {:?}", self.set)))?;
        Ok(csi.hhat_su.column(user).dotc(&self.vectors.column(i)).norm_sqr())
    }

    /// Effective gains for every member, in set order.
    pub fn gains(&self, csi: &CsiView) -> Vec<f64> {
        self.set
            .iter()
            .enumerate()
            .map(|(i, &u)| csi.hhat_su.column(u).dotc(&self.vectors.column(i)).norm_sqr())
            .collect()
    }

    /// Keep only the listed members, with their beams unchanged.
    pub fn restrict(&self, keep: &[usize]) -> BeamSet {
        let cols: Vec<usize> = keep.iter().map(|&u| self.position(u).expect("restrict to a member")).collect();
        BeamSet { set: keep.to_vec(), vectors: self.vectors.select_columns(&cols), null_count: self.null_count }
    }
}

/// ZF beams for `set`, nulling the other members' and every PR's estimated
/// channel.
pub fn zf_vectors(csi: &CsiView, set: &[usize]) -> Result<BeamSet> {
    let m = csi.antennas();
    let l = csi.primary_pairs();
    let n = set.len();
    if n == 0 {
        return Err(Error::EmptySet);
    }
    if n + l > m {
        return Err(Error::Usage(format!("{} SUs and {l} PRs need at least {} antennas (have {m})", n, n + l)));
    }
    let cols = n + l;
    let mut g = DMatrix::<Cplx>::zeros(m, cols);
    for (i, &u) in set.iter().enumerate() {
        g.set_column(i, &csi.hhat_su.column(u));
    }
    for j in 0..l {
        g.set_column(n + j, &csi.hhat_pr.column(j));
    }

    let qr = g.col_piv_qr();
    let r = qr.r();
    let mut order = DMatrix::<f64>::from_fn(1, cols, |_, j| j as f64);
    qr.p().permute_columns(&mut order);

    let diag: Vec<f64> = (0..cols).map(|i| r[(i, i)].norm()).collect();
    let largest = diag.iter().cloned().fold(0.0, f64::max);
    let smallest = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smallest > 0.0 { largest / smallest } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { set: set.to_vec(), condition });
    }

    let identity = DMatrix::<Cplx>::identity(cols, cols);
    let r_inv = r.solve_upper_triangular(&identity).ok_or_else(|| Error::Singular { set: set.to_vec(), condition })?;
    let dual = qr.q() * r_inv.adjoint();

    // dual column j belongs to original column order[j].
    let mut vectors = DMatrix::<Cplx>::zeros(m, n);
    for (j, &orig) in order.iter().enumerate() {
        let orig = orig as usize;
        if orig < n {
            let col = dual.column(j);
            let norm = col.norm();
            vectors.set_column(orig, &(col / Cplx::from(norm)));
        }
    }
    Ok(BeamSet { set: set.to_vec(), vectors, null_count: n - 1 + l })
}
