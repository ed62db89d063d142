//! Hidden-layer concatenated network representation.
//!
//! A network is described by an [`ArchitectureVector`] `[M_0, ..., M_L]`
//! (input width, hidden widths, single output).  Hidden-layer weights and
//! biases are random and fixed: a base random vector `xi`, drawn uniformly
//! on `[-1, 1]`, is partitioned layer by layer and scaled by the per-layer
//! entries of the [`HiddenMagnitudeVector`] `R`.  Only the output weights
//! `beta` are trainable, and the output layer is linear with zero bias.
//!
//! In hidden-layer concatenated mode the basis exposed to the output layer
//! is the union of *all* hidden-node output fields, ordered layer-major:
//! layer 1 nodes first, then layer 2, and so on (the input fields are not
//! included in the concatenation).  Conventional mode restricts the basis to
//! the last hidden layer and serves as the baseline.
//!
//! [`evaluate_basis`] produces the `Q x N_c` matrix of hidden-node outputs
//! on a point set along with any requested pure partial derivatives, which
//! are computed by seeding a [`Jet`](crate::jets::Jet) along one coordinate
//! and propagating it through the layered affine-transform/activation
//! recurrence.
//!
//! The module also implements three capacity-preserving network surgeries:
//! appending a hidden layer or widening an existing one leaves the network
//! output function pointwise unchanged, and extending the coefficient vector
//! with a fresh random layer preserves the existing basis columns
//! bit-exactly.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::jets::{Jet, MAX_ORDER};
use crate::{Error, Result};

/// Identifies a pure partial derivative: `order` applications of
/// `d/dx_coord`.  Order 0 denotes the field value itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DerivKey {
    pub coord: usize,
    pub order: usize,
}

impl DerivKey {
    pub fn new(coord: usize, order: usize) -> Self {
        DerivKey { coord, order }
    }

    /// The identity operator (the field value).
    pub fn value() -> Self {
        DerivKey { coord: 0, order: 0 }
    }
}

/// Which hidden nodes feed the output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisMode {
    /// Every hidden node, layer-major (hidden-layer concatenation).
    HlConc,
    /// Only the last hidden layer (conventional ELM baseline).
    Conventional,
}

impl std::fmt::Display for BasisMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisMode::HlConc => write!(f, "hlconc"),
            BasisMode::Conventional => write!(f, "conventional"),
        }
    }
}

/// Layer-width list `[M_0, M_1, ..., M_L]` with `M_0 = d` and `M_L = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureVector {
    layers: Vec<usize>,
}

impl ArchitectureVector {
    pub fn new(layers: Vec<usize>) -> Result<Self> {
        if layers.len() < 3 {
            return Err(Error::invalid(
                "architecture needs at least one hidden layer: [M0, M1, ..., 1]",
            ));
        }
        if layers.iter().any(|&m| m == 0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if !(1..=2).contains(&layers[0]) {
            return Err(Error::invalid("input dimension must be 1 or 2"));
        }
        if *layers.last().unwrap() != 1 {
            return Err(Error::invalid("output layer must have a single node"));
        }
        Ok(ArchitectureVector { layers })
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0]
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.layers[1..self.layers.len() - 1]
    }

    pub fn n_hidden_layers(&self) -> usize {
        self.layers.len() - 2
    }

    /// Total number of hidden-layer coefficients
    /// `N_h = sum_i (M_{i-1} + 1) M_i`.
    pub fn n_hidden_coeffs(&self) -> usize {
        (1..self.layers.len() - 1)
            .map(|i| (self.layers[i - 1] + 1) * self.layers[i])
            .sum()
    }

    /// Number of concatenated basis fields `N_c = sum_i M_i`.
    pub fn n_basis(&self) -> usize {
        self.hidden_widths().iter().sum()
    }

    pub fn last_hidden_width(&self) -> usize {
        self.layers[self.layers.len() - 2]
    }

    /// Number of basis columns exposed in the given mode.
    pub fn n_columns(&self, mode: BasisMode) -> usize {
        match mode {
            BasisMode::HlConc => self.n_basis(),
            BasisMode::Conventional => self.last_hidden_width(),
        }
    }

    /// Coefficient count of hidden layer `i` (0-based): `(M_i + 1) M_{i+1}`
    /// in layer-list indexing.
    fn layer_coeff_count(&self, hidden_index: usize) -> usize {
        (self.layers[hidden_index] + 1) * self.layers[hidden_index + 1]
    }
}

/// Per-hidden-layer scale `R_i` of the uniform random coefficient
/// distribution: layer-`i` weights and biases live in `[-|R_i|, |R_i|]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenMagnitudeVector(pub Vec<f64>);

impl HiddenMagnitudeVector {
    /// The conventional-ELM convention: one magnitude for every layer.
    pub fn uniform(value: f64, n_hidden_layers: usize) -> Self {
        HiddenMagnitudeVector(vec![value; n_hidden_layers])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A fully materialized network: architecture, the base random vector `xi`,
/// the hidden magnitude vector, the per-layer weights/biases derived from
/// them, and the trainable output weights `beta`.
///
/// `theta` (the flattened hidden coefficients) uses the layout
/// `[W^(1) col-major, b^(1), W^(2) col-major, b^(2), ...]` and satisfies
/// `theta_i = R_i * xi_i` slice by slice.  `xi` is drawn layer by layer in
/// architecture order, which is what makes prefix preservation under
/// [`extend_coefficient_vector`] possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCoefficients {
    arch: ArchitectureVector,
    magnitudes: HiddenMagnitudeVector,
    xi: DVector<f64>,
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
    /// Output weights, ordered like the concatenated basis columns.
    pub beta: DVector<f64>,
}

/// Draw `xi` once from a seeded ChaCha20 generator and scale it into the
/// hidden coefficients.  `beta` starts at zero.
///
/// ChaCha20 is a portable counter-based generator: the same seed yields the
/// same network on every platform.  Reproducibility is internal only; other
/// implementations' coefficient draws are generator-specific.
pub fn assign_random_coefficients(
    arch: &ArchitectureVector,
    magnitudes: &HiddenMagnitudeVector,
    seed: u64,
) -> Result<NetworkCoefficients> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    draw_coefficients(arch, magnitudes, &mut rng)
}

/// Like [`assign_random_coefficients`] but drawing from a caller-owned
/// generator stream, so several networks (one per subdomain, say) can share
/// one seed.
pub fn draw_coefficients(
    arch: &ArchitectureVector,
    magnitudes: &HiddenMagnitudeVector,
    rng: &mut ChaCha20Rng,
) -> Result<NetworkCoefficients> {
    let xi = DVector::from_fn(arch.n_hidden_coeffs(), |_, _| rng.gen_range(-1.0..=1.0));
    coefficients_from_xi(arch, magnitudes, xi)
}

/// Build coefficients from an explicitly supplied `xi` (test hook; also the
/// shared implementation behind [`assign_random_coefficients`]).
pub fn coefficients_from_xi(
    arch: &ArchitectureVector,
    magnitudes: &HiddenMagnitudeVector,
    xi: DVector<f64>,
) -> Result<NetworkCoefficients> {
    if magnitudes.len() != arch.n_hidden_layers() {
        return Err(Error::invalid(format!(
            "magnitude vector has {} entries but the architecture has {} hidden layers",
            magnitudes.len(),
            arch.n_hidden_layers()
        )));
    }
    if xi.len() != arch.n_hidden_coeffs() {
        return Err(Error::invalid(format!(
            "xi has {} entries, expected N_h = {}",
            xi.len(),
            arch.n_hidden_coeffs()
        )));
    }
    let mut weights = Vec::with_capacity(arch.n_hidden_layers());
    let mut biases = Vec::with_capacity(arch.n_hidden_layers());
    let mut offset = 0;
    for i in 0..arch.n_hidden_layers() {
        let (rows, cols) = (arch.layers[i], arch.layers[i + 1]);
        let r = magnitudes.0[i];
        let w = DMatrix::from_fn(rows, cols, |ri, ci| r * xi[offset + ci * rows + ri]);
        offset += rows * cols;
        let b = DVector::from_fn(cols, |ri, _| r * xi[offset + ri]);
        offset += cols;
        weights.push(w);
        biases.push(b);
    }
    let beta = DVector::zeros(arch.n_basis());
    Ok(NetworkCoefficients {
        arch: arch.clone(),
        magnitudes: magnitudes.clone(),
        xi,
        weights,
        biases,
        beta,
    })
}

/// Hidden-node output fields `Psi` and their requested partial derivatives
/// on a point set.  All matrices share the shape `Q x N_c` and the same
/// column order (layer-major in concatenated mode).
#[derive(Debug, Clone)]
pub struct BasisDerivatives {
    /// The points the basis was evaluated at (`Q x d`).
    pub points: DMatrix<f64>,
    /// Hidden-node outputs.
    pub psi: DMatrix<f64>,
    /// Requested derivative matrices, keyed by (coordinate, order).
    pub derivs: BTreeMap<DerivKey, DMatrix<f64>>,
}

impl BasisDerivatives {
    pub fn n_points(&self) -> usize {
        self.psi.nrows()
    }

    pub fn n_basis(&self) -> usize {
        self.psi.ncols()
    }

    /// The matrix for `key`; order 0 is `psi` itself.
    pub fn matrix(&self, key: DerivKey) -> Result<&DMatrix<f64>> {
        if key.order == 0 {
            return Ok(&self.psi);
        }
        self.derivs.get(&key).ok_or(Error::MissingDerivative {
            coord: key.coord,
            order: key.order,
        })
    }
}

impl NetworkCoefficients {
    pub fn arch(&self) -> &ArchitectureVector {
        &self.arch
    }

    pub fn magnitudes(&self) -> &HiddenMagnitudeVector {
        &self.magnitudes
    }

    pub fn xi(&self) -> &DVector<f64> {
        &self.xi
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[DVector<f64>] {
        &self.biases
    }

    /// The flattened hidden coefficients in the documented layout.
    pub fn theta_flat(&self) -> DVector<f64> {
        let mut theta = Vec::with_capacity(self.arch.n_hidden_coeffs());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            theta.extend(w.iter());
            theta.extend(b.iter());
        }
        DVector::from_vec(theta)
    }

    /// Replace the output weights, checking the length for the given mode.
    pub fn with_beta(mut self, beta: DVector<f64>, mode: BasisMode) -> Result<Self> {
        if beta.len() != self.arch.n_columns(mode) {
            return Err(Error::invalid(format!(
                "beta has {} entries, expected {}",
                beta.len(),
                self.arch.n_columns(mode)
            )));
        }
        self.beta = beta;
        Ok(self)
    }

    /// Network output `u(x) = Phi(x) beta^T` at arbitrary points, using the
    /// stored `beta`.
    pub fn output_at(&self, points: &DMatrix<f64>, mode: BasisMode) -> Result<DVector<f64>> {
        let basis = self.basis(points, &[], mode)?;
        network_output(&basis, &self.beta)
    }

    /// Evaluate the basis fields and the requested derivatives at `points`.
    pub fn basis(
        &self,
        points: &DMatrix<f64>,
        requested: &[DerivKey],
        mode: BasisMode,
    ) -> Result<BasisDerivatives> {
        evaluate_basis_impl(self, points, requested, mode)
    }

    /// Exact round-trip JSON serialization for checkpointing between time
    /// blocks.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("bad network JSON: {e}")))
    }
}

/// Concatenated-basis evaluation (all hidden layers).
pub fn evaluate_basis(
    net: &NetworkCoefficients,
    points: &DMatrix<f64>,
    requested: &[DerivKey],
) -> Result<BasisDerivatives> {
    net.basis(points, requested, BasisMode::HlConc)
}

/// Conventional-ELM basis: only the last hidden layer's columns.
pub fn conventional_basis(
    net: &NetworkCoefficients,
    points: &DMatrix<f64>,
    requested: &[DerivKey],
) -> Result<BasisDerivatives> {
    net.basis(points, requested, BasisMode::Conventional)
}

/// `U = Psi beta^T`: exactly linear in `beta`.
pub fn network_output(basis: &BasisDerivatives, beta: &DVector<f64>) -> Result<DVector<f64>> {
    if beta.len() != basis.n_basis() {
        return Err(Error::invalid(format!(
            "beta has {} entries but the basis has {} columns",
            beta.len(),
            basis.n_basis()
        )));
    }
    Ok(&basis.psi * beta)
}

/// Column offset of hidden layer `i` (0-based) in the concatenated layout.
fn column_offset(arch: &ArchitectureVector, hidden_index: usize) -> usize {
    arch.hidden_widths()[..hidden_index].iter().sum()
}

fn evaluate_basis_impl(
    net: &NetworkCoefficients,
    points: &DMatrix<f64>,
    requested: &[DerivKey],
    mode: BasisMode,
) -> Result<BasisDerivatives> {
    let arch = &net.arch;
    let d = arch.input_dim();
    if points.ncols() != d {
        return Err(Error::invalid(format!(
            "points have {} columns but the network has {} inputs",
            points.ncols(),
            d
        )));
    }
    for key in requested {
        if key.order == 0 || key.order > MAX_ORDER {
            return Err(Error::invalid(format!(
                "unsupported derivative order {} (must be 1..=3)",
                key.order
            )));
        }
        if key.coord >= d {
            return Err(Error::invalid(format!(
                "derivative coordinate {} out of range for {d} inputs",
                key.coord
            )));
        }
    }

    let q = points.nrows();
    let n_cols = arch.n_columns(mode);
    let last_hidden = arch.n_hidden_layers() - 1;
    let record_offset = |layer: usize| -> Option<usize> {
        match mode {
            BasisMode::HlConc => Some(column_offset(arch, layer)),
            BasisMode::Conventional => (layer == last_hidden).then_some(0),
        }
    };

    // Value pass: the plain layered recurrence with the Gaussian applied
    // entrywise.
    let mut psi = DMatrix::zeros(q, n_cols);
    let mut cur = points.clone();
    for (layer, (w, b)) in net.weights.iter().zip(&net.biases).enumerate() {
        let mut z = &cur * w;
        for j in 0..z.ncols() {
            let bj = b[j];
            for v in z.column_mut(j).iter_mut() {
                let y = *v + bj;
                *v = (-y * y).exp();
            }
        }
        if let Some(offset) = record_offset(layer) {
            psi.view_mut((0, offset), (q, z.ncols())).copy_from(&z);
        }
        cur = z;
    }

    // One derivative pass per coordinate, carrying derivative lanes up to
    // the highest requested order for that coordinate.  The affine transform
    // maps lanes independently; the activation mixes them entrywise through
    // the jet composition.
    let mut max_order: BTreeMap<usize, usize> = BTreeMap::new();
    for key in requested {
        let entry = max_order.entry(key.coord).or_insert(0);
        *entry = (*entry).max(key.order);
    }
    let mut derivs: BTreeMap<DerivKey, DMatrix<f64>> = requested
        .iter()
        .map(|&key| (key, DMatrix::zeros(q, n_cols)))
        .collect();

    for (&coord, &order) in &max_order {
        let mut lanes: Vec<DMatrix<f64>> = Vec::with_capacity(order + 1);
        lanes.push(points.clone());
        let mut seed = DMatrix::zeros(q, d);
        seed.column_mut(coord).fill(1.0);
        lanes.push(seed);
        for _ in 2..=order {
            lanes.push(DMatrix::zeros(q, d));
        }

        for (layer, (w, b)) in net.weights.iter().zip(&net.biases).enumerate() {
            let mut z: Vec<DMatrix<f64>> = lanes.iter().map(|lane| lane * w).collect();
            let m = z[0].ncols();
            for j in 0..m {
                z[0].column_mut(j).add_scalar_mut(b[j]);
            }
            let mut coeffs = [0.0; MAX_ORDER + 1];
            for j in 0..m {
                for row in 0..q {
                    for (k, lane) in z.iter().enumerate() {
                        coeffs[k] = lane[(row, j)];
                    }
                    let jet = Jet::from_derivatives(&coeffs[..=order]).gaussian();
                    for (k, lane) in z.iter_mut().enumerate() {
                        lane[(row, j)] = jet.derivative(k);
                    }
                }
            }
            if let Some(offset) = record_offset(layer) {
                for (&key, matrix) in derivs.iter_mut() {
                    if key.coord == coord {
                        matrix
                            .view_mut((0, offset), (q, m))
                            .copy_from(&z[key.order]);
                    }
                }
            }
            lanes = z;
        }
    }

    if psi.iter().any(|v| !v.is_finite())
        || derivs.values().any(|m| m.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::NonFinite("basis evaluation".into()));
    }

    Ok(BasisDerivatives {
        points: points.clone(),
        psi,
        derivs,
    })
}

/// Re-derive the stored `xi` slice of one hidden layer after a surgery
/// changed its coefficients, keeping `theta_i = R_i * xi_i` intact.  A layer
/// whose magnitude is zero but whose new coefficients are not gets its
/// magnitude promoted to 1.
fn refresh_xi_layer(net: &mut NetworkCoefficients, hidden_index: usize) {
    let mut offset = 0;
    for i in 0..hidden_index {
        offset += net.arch.layer_coeff_count(i);
    }
    let count = net.arch.layer_coeff_count(hidden_index);
    let theta: Vec<f64> = net.weights[hidden_index]
        .iter()
        .chain(net.biases[hidden_index].iter())
        .copied()
        .collect();
    debug_assert_eq!(theta.len(), count);
    let r = net.magnitudes.0[hidden_index];
    if r != 0.0 {
        for (k, t) in theta.iter().enumerate() {
            net.xi[offset + k] = t / r;
        }
    } else if theta.iter().all(|&t| t == 0.0) {
        for k in 0..count {
            net.xi[offset + k] = 0.0;
        }
    } else {
        net.magnitudes.0[hidden_index] = 1.0;
        for (k, t) in theta.iter().enumerate() {
            net.xi[offset + k] = *t;
        }
    }
}

fn rebuild_xi(net: &mut NetworkCoefficients) {
    net.xi = DVector::zeros(net.arch.n_hidden_coeffs());
    for i in 0..net.arch.n_hidden_layers() {
        refresh_xi_layer(net, i);
    }
}

/// Append a hidden layer of `n` nodes with the given (arbitrary) incoming
/// coefficients; the new nodes' output weights are zero, so the returned
/// network computes the identical output function.
///
/// `new_layer_coeffs` holds the `M_{L-1} x n` weight block (column-major)
/// followed by the `n` biases.
pub fn append_hidden_layer(
    net: &NetworkCoefficients,
    n: usize,
    new_layer_coeffs: &[f64],
) -> Result<NetworkCoefficients> {
    if n == 0 {
        return Err(Error::invalid("appended layer needs at least one node"));
    }
    let m_last = net.arch.last_hidden_width();
    let expected = (m_last + 1) * n;
    if new_layer_coeffs.len() != expected {
        return Err(Error::invalid(format!(
            "appended layer needs {expected} coefficients, got {}",
            new_layer_coeffs.len()
        )));
    }
    let mut layers = net.arch.layers.clone();
    layers.insert(layers.len() - 1, n);
    let arch = ArchitectureVector::new(layers)?;

    let mut weights = net.weights.clone();
    let mut biases = net.biases.clone();
    weights.push(DMatrix::from_column_slice(
        m_last,
        n,
        &new_layer_coeffs[..m_last * n],
    ));
    biases.push(DVector::from_column_slice(&new_layer_coeffs[m_last * n..]));

    let mut magnitudes = net.magnitudes.clone();
    magnitudes.0.push(1.0);

    let mut beta = net.beta.as_slice().to_vec();
    beta.extend(std::iter::repeat_n(0.0, n));

    let mut result = NetworkCoefficients {
        arch,
        magnitudes,
        xi: DVector::zeros(0),
        weights,
        biases,
        beta: DVector::from_vec(beta),
    };
    rebuild_xi(&mut result);
    Ok(result)
}

/// Add one node to hidden layer `s` (1-based).  The new node's incoming
/// coefficients are arbitrary; its outgoing weights to layer `s + 1` and its
/// output weight are zero, so the output function is pointwise unchanged.
///
/// `new_node_coeffs` holds the `M_{s-1}` incoming weights followed by the
/// bias.
pub fn widen_hidden_layer(
    net: &NetworkCoefficients,
    s: usize,
    new_node_coeffs: &[f64],
) -> Result<NetworkCoefficients> {
    let n_hidden = net.arch.n_hidden_layers();
    if s == 0 || s > n_hidden {
        return Err(Error::invalid(format!(
            "hidden layer index {s} out of range 1..={n_hidden}"
        )));
    }
    let idx = s - 1;
    let fan_in = net.arch.layers[idx];
    if new_node_coeffs.len() != fan_in + 1 {
        return Err(Error::invalid(format!(
            "widening layer {s} needs {} coefficients, got {}",
            fan_in + 1,
            new_node_coeffs.len()
        )));
    }

    let mut layers = net.arch.layers.clone();
    layers[s] += 1;
    let arch = ArchitectureVector::new(layers)?;

    let mut weights = net.weights.clone();
    let mut biases = net.biases.clone();
    let old_w = &net.weights[idx];
    let mut w = DMatrix::zeros(fan_in, old_w.ncols() + 1);
    w.view_mut((0, 0), (fan_in, old_w.ncols())).copy_from(old_w);
    for (r, v) in new_node_coeffs[..fan_in].iter().enumerate() {
        w[(r, old_w.ncols())] = *v;
    }
    weights[idx] = w;
    biases[idx] = {
        let mut b = net.biases[idx].as_slice().to_vec();
        b.push(new_node_coeffs[fan_in]);
        DVector::from_vec(b)
    };

    // Outgoing weights of the new node to the next hidden layer are zero.
    if idx + 1 < n_hidden {
        let old_next = &net.weights[idx + 1];
        let mut w_next = DMatrix::zeros(old_next.nrows() + 1, old_next.ncols());
        w_next
            .view_mut((0, 0), (old_next.nrows(), old_next.ncols()))
            .copy_from(old_next);
        weights[idx + 1] = w_next;
    }

    // Insert a zero output weight at the end of layer s's beta block.
    let insert_at = column_offset(&net.arch, idx) + net.arch.hidden_widths()[idx];
    let mut beta = net.beta.as_slice().to_vec();
    beta.insert(insert_at, 0.0);

    let mut result = NetworkCoefficients {
        arch,
        magnitudes: net.magnitudes.clone(),
        xi: DVector::zeros(0),
        weights,
        biases,
        beta: DVector::from_vec(beta),
    };
    rebuild_xi(&mut result);
    Ok(result)
}

/// Append a hidden layer of `n` nodes whose coefficients are fresh random
/// draws scaled by `r_new`, preserving the first `N_h1` entries of `theta`
/// exactly.  The first `N_c1` basis columns of the result equal the original
/// basis bit-exactly; `beta` is re-initialized to zeros (retraining
/// required).
pub fn extend_coefficient_vector(
    net: &NetworkCoefficients,
    n: usize,
    r_new: f64,
    seed2: u64,
) -> Result<NetworkCoefficients> {
    if n == 0 {
        return Err(Error::invalid("extension needs at least one node"));
    }
    let m_last = net.arch.last_hidden_width();
    let mut rng = ChaCha20Rng::seed_from_u64(seed2);
    let draws: Vec<f64> = (0..(m_last + 1) * n)
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();

    let mut layers = net.arch.layers.clone();
    layers.insert(layers.len() - 1, n);
    let arch = ArchitectureVector::new(layers)?;

    let mut weights = net.weights.clone();
    let mut biases = net.biases.clone();
    weights.push(DMatrix::from_fn(m_last, n, |r, c| {
        r_new * draws[c * m_last + r]
    }));
    biases.push(DVector::from_fn(n, |r, _| r_new * draws[m_last * n + r]));

    let mut magnitudes = net.magnitudes.clone();
    magnitudes.0.push(r_new);

    let mut xi = net.xi.as_slice().to_vec();
    xi.extend_from_slice(&draws);

    Ok(NetworkCoefficients {
        arch: arch.clone(),
        magnitudes,
        xi: DVector::from_vec(xi),
        weights,
        biases,
        beta: DVector::zeros(arch.n_basis()),
    })
}
