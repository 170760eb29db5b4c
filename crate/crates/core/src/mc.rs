//! Monte Carlo ground truth: sample local Haar unitaries, evolve density
//! matrices through the layered circuit and estimate the loss variance.
//!
//! Sample `i` draws all of its randomness from a ChaCha8 stream seeded with
//! the user seed and stream number `i`, and the reduction runs in sample
//! order, so estimates are bit-identical for any thread count.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{validate_state, Channel, VALIDATION_TOL};
use crate::error::{invalid, Error, Result};
use crate::ltm::{mean_ltm_over_ensemble, Ltm};
use crate::operator::{is_hermitian, kron_all, CMatrix, DenseOperator, SiteMap, C64};
use crate::partition::SubsystemPartition;

/// Largest Hilbert-space dimension simulated densely (12 qubits).
pub const DEFAULT_SIMULATION_CAP: usize = 4096;
/// Smallest sample count accepted by the estimators.
pub const MIN_SAMPLES: usize = 100;

/// A circuit `U_{L+1} ∘ E_L ∘ U_L ∘ ⋯ ∘ E_1 ∘ U_1` with local Haar layers `U_l`.
#[derive(Debug, Clone)]
pub struct LayeredCircuitSpec {
    partition: SubsystemPartition,
    intermediate: Vec<Channel>,
    observable: DenseOperator,
    initial_state: DenseOperator,
    simulation_cap: usize,
}

impl LayeredCircuitSpec {
    /// `intermediate[l]` is applied after local layer `l + 1`.
    pub fn new(initial_state: DenseOperator, intermediate: Vec<Channel>, observable: DenseOperator) -> Result<Self> {
        let partition = initial_state.partition().clone();
        partition.ensure_same(observable.partition())?;
        validate_state(initial_state.matrix())?;
        if !observable.is_hermitian(VALIDATION_TOL) {
            return invalid("observable is not Hermitian");
        }
        for ch in &intermediate {
            ch.check_partition(&partition)?;
        }
        Ok(LayeredCircuitSpec {
            partition,
            intermediate,
            observable,
            initial_state,
            simulation_cap: DEFAULT_SIMULATION_CAP,
        })
    }

    /// `depth` copies of the same intermediate channel.
    pub fn homogeneous(
        initial_state: DenseOperator,
        channel: Channel,
        depth: usize,
        observable: DenseOperator,
    ) -> Result<Self> {
        Self::new(initial_state, vec![channel; depth], observable)
    }

    pub fn with_simulation_cap(mut self, cap: usize) -> Self {
        self.simulation_cap = cap;
        self
    }

    pub fn partition(&self) -> &SubsystemPartition {
        &self.partition
    }

    pub fn depth(&self) -> usize {
        self.intermediate.len()
    }

    pub fn intermediate(&self) -> &[Channel] {
        &self.intermediate
    }

    pub fn observable(&self) -> &DenseOperator {
        &self.observable
    }

    pub fn initial_state(&self) -> &DenseOperator {
        &self.initial_state
    }

    fn check_cap(&self) -> Result<()> {
        let dim = self.partition.dim();
        if dim > self.simulation_cap {
            return Err(Error::SimulationCap {
                dim,
                cap: self.simulation_cap,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    /// Unbiased sample variance of the loss.
    pub variance: f64,
    /// Standard error of `variance`, from the fourth central moment.
    pub standard_error_of_variance: f64,
    /// Standard error of `mean`.
    pub standard_error_of_mean: f64,
    pub samples: usize,
    pub seed: u64,
}

impl MCEstimate {
    /// Summary statistics of `values`, taken in order.
    pub fn from_samples(values: &[f64], seed: u64) -> Result<Self> {
        let n = values.len();
        if n < 4 {
            return invalid("at least four samples are needed for a variance standard error");
        }
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let (mut m2, mut m4) = (0.0, 0.0);
        for v in values {
            let c = (v - mean).powi(2);
            m2 += c;
            m4 += c * c;
        }
        let variance = m2 / (nf - 1.0);
        let m4 = m4 / nf;
        let var_of_var = (m4 - variance * variance * (nf - 3.0) / (nf - 1.0)) / nf;
        Ok(MCEstimate {
            mean,
            variance,
            standard_error_of_variance: var_of_var.max(0.0).sqrt(),
            standard_error_of_mean: (variance / nf).sqrt(),
            samples: n,
            seed,
        })
    }

    /// `|variance − value|` in units of the standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = (self.variance - value).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.standard_error_of_variance
        }
    }
}

/// The random-number stream used for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Haar-random `U(d)` via QR of a complex Ginibre matrix, with the phases of
/// `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * scale, im * scale)
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let diag = r[(j, j)];
        let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// One Haar unitary per subsystem.
pub fn haar_local_factors<R: Rng + ?Sized>(partition: &SubsystemPartition, rng: &mut R) -> Vec<CMatrix> {
    partition.dims().iter().map(|&d| haar_unitary(d, rng)).collect()
}

/// `⊗_m U_m` with Haar factors drawn from stream `stream` of `seed`.
pub fn haar_local_unitary(partition: &SubsystemPartition, seed: u64, stream: u64) -> DenseOperator {
    let mut rng = sample_rng(seed, stream);
    let factors = haar_local_factors(partition, &mut rng);
    DenseOperator::new(kron_all(&factors), partition.clone()).expect("dimension matches the partition")
}

/// `count` Kraus operators of a random CPTP map on `C^d`: Ginibre matrices
/// `G_i` normalized as `K_i = G_i S^{−1/2}` with `S = Σ G_i† G_i`.
pub fn random_kraus<R: Rng + ?Sized>(d: usize, count: usize, rng: &mut R) -> Vec<CMatrix> {
    let ginibre: Vec<CMatrix> = (0..count)
        .map(|_| {
            CMatrix::from_fn(d, d, |_, _| {
                C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
            })
        })
        .collect();
    let s = ginibre.iter().fold(CMatrix::zeros(d, d), |acc, g| acc + g.adjoint() * g);
    let eig = s.symmetric_eigen();
    let inv_sqrt = eig.eigenvalues.map(|x| C64::new(1.0 / x.sqrt(), 0.0));
    let root = &eig.eigenvectors * CMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.adjoint();
    ginibre.into_iter().map(|g| g * &root).collect()
}

/// Per-site index maps, built once per estimate.
struct LocalLayer {
    maps: Vec<SiteMap>,
}

impl LocalLayer {
    fn new(partition: &SubsystemPartition) -> Result<Self> {
        let maps = (0..partition.num_subsystems())
            .map(|m| SiteMap::new(partition, &[m]))
            .collect::<Result<_>>()?;
        Ok(LocalLayer { maps })
    }

    fn apply<R: Rng + ?Sized>(&self, partition: &SubsystemPartition, rho: CMatrix, rng: &mut R) -> CMatrix {
        let factors = haar_local_factors(partition, rng);
        self.maps
            .iter()
            .zip(&factors)
            .fold(rho, |acc, (map, u)| map.conjugate(u, &acc))
    }
}

fn loss(rho: &CMatrix, h: &CMatrix) -> f64 {
    crate::operator::trace_product(rho, h).re
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < MIN_SAMPLES {
        return invalid(format!("at least {MIN_SAMPLES} samples are required, got {n_samples}"));
    }
    Ok(())
}

fn collect_estimate(values: Vec<Result<f64>>, seed: u64) -> Result<MCEstimate> {
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    MCEstimate::from_samples(&values, seed)
}

/// Samples of `Tr[Φ_θ(ρ) H]` for sample indices `0..n_samples`.
pub fn sample_losses(spec: &LayeredCircuitSpec, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    spec.check_cap()?;
    let partition = &spec.partition;
    let layer = LocalLayer::new(partition)?;
    let h = spec.observable.matrix();
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let mut rho = layer.apply(partition, spec.initial_state.matrix().clone(), &mut rng);
            for ch in &spec.intermediate {
                rho = ch.act(partition, &rho, false)?;
                rho = layer.apply(partition, rho, &mut rng);
            }
            Ok(loss(&rho, h))
        })
        .collect::<Vec<Result<f64>>>()
        .into_iter()
        .collect()
}

/// Monte Carlo estimate of the loss variance over local Haar layers.
pub fn estimate_variance(spec: &LayeredCircuitSpec, n_samples: usize, seed: u64) -> Result<MCEstimate> {
    check_samples(n_samples)?;
    let values = sample_losses(spec, n_samples, seed)?;
    MCEstimate::from_samples(&values, seed)
}

/// A QResNet-style circuit: every intermediate layer is `e^{iφG}` with a
/// fresh `φ ~ N(0, σ²)`, optionally followed by a fixed noise channel.
#[derive(Debug, Clone)]
pub struct QResNetSpec {
    pub partition: SubsystemPartition,
    pub depth: usize,
    pub generator: DenseOperator,
    pub sigma: f64,
    pub noise: Option<Channel>,
    pub initial_state: DenseOperator,
    pub observable: DenseOperator,
}

/// Eigendecomposition `G = V diag(g) V†` used to form `e^{iφG}` cheaply.
#[derive(Debug, Clone)]
pub struct GeneratorExp {
    vectors: CMatrix,
    values: DVector<f64>,
}

impl GeneratorExp {
    pub fn new(generator: &CMatrix) -> Result<Self> {
        if !is_hermitian(generator, VALIDATION_TOL) {
            return invalid("generator G is not Hermitian");
        }
        let eig = generator.clone().symmetric_eigen();
        Ok(GeneratorExp {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        })
    }

    /// `e^{iφG}`.
    pub fn unitary(&self, phi: f64) -> CMatrix {
        let phases = self.values.map(|g| C64::from_polar(1.0, phi * g));
        let mut scaled = self.vectors.clone();
        for (j, p) in phases.iter().enumerate() {
            let mut col = scaled.column_mut(j);
            col *= *p;
        }
        scaled * self.vectors.adjoint()
    }

    /// `‖G‖₂² = Σ g²`.
    pub fn hs_norm_sqr(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum()
    }
}

pub fn qresnet_estimate(spec: &QResNetSpec, n_samples: usize, seed: u64) -> Result<MCEstimate> {
    check_samples(n_samples)?;
    let partition = &spec.partition;
    for op in [&spec.generator, &spec.initial_state, &spec.observable] {
        partition.ensure_same(op.partition())?;
    }
    if spec.sigma < 0.0 || !spec.sigma.is_finite() {
        return invalid(format!("σ = {} must be finite and non-negative", spec.sigma));
    }
    validate_state(spec.initial_state.matrix())?;
    if !spec.observable.is_hermitian(VALIDATION_TOL) {
        return invalid("observable is not Hermitian");
    }
    if let Some(noise) = &spec.noise {
        noise.check_partition(partition)?;
    }
    let dim = partition.dim();
    if dim > DEFAULT_SIMULATION_CAP {
        return Err(Error::SimulationCap {
            dim,
            cap: DEFAULT_SIMULATION_CAP,
        });
    }
    let exp = GeneratorExp::new(spec.generator.matrix())?;
    let normal = Normal::new(0.0, spec.sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let layer = LocalLayer::new(partition)?;
    let h = spec.observable.matrix();
    let values: Vec<Result<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let mut rho = layer.apply(partition, spec.initial_state.matrix().clone(), &mut rng);
            for _ in 0..spec.depth {
                let u = exp.unitary(normal.sample(&mut rng));
                rho = &u * rho * u.adjoint();
                if let Some(noise) = &spec.noise {
                    rho = noise.act(partition, &rho, false)?;
                }
                rho = layer.apply(partition, rho, &mut rng);
            }
            Ok(loss(&rho, h))
        })
        .collect();
    collect_estimate(values, seed)
}

/// Gauss–Hermite nodes and weights for `E[f(φ)]` with `φ ~ N(0, 1)`, from the
/// Golub–Welsch eigenvalue problem of the probabilists' Hermite recurrence.
pub fn gauss_hermite_normal(order: usize) -> Result<Vec<(f64, f64)>> {
    if order == 0 {
        return invalid("quadrature order must be positive");
    }
    let jacobi = DMatrix::from_fn(order, order, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut nodes: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &x)| (x, eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(nodes)
}

/// `E_φ[T(e^{iφG})]` for `φ ~ N(0, σ²)` by Gauss–Hermite quadrature, with the
/// optional noise channel applied after each rotation.
pub fn qresnet_mean_ltm(
    generator: &CMatrix,
    sigma: f64,
    noise: Option<&Channel>,
    partition: &SubsystemPartition,
    order: usize,
) -> Result<Ltm> {
    let exp = GeneratorExp::new(generator)?;
    let members = gauss_hermite_normal(order)?
        .into_iter()
        .map(|(x, w)| {
            let rotation = Channel::unitary(exp.unitary(sigma * x))?;
            let channel = match noise {
                Some(n) => Channel::composition(vec![rotation, n.clone()])?,
                None => rotation,
            };
            Ok((w, channel))
        })
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = members.iter().map(|(w, _)| w).sum();
    let members: Vec<(f64, Channel)> = members.into_iter().map(|(w, c)| (w / total, c)).collect();
    mean_ltm_over_ensemble(&members, true, partition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{pauli, zero_state};

    fn qubit(n: usize) -> SubsystemPartition {
        SubsystemPartition::qubits(n).unwrap()
    }

    #[test]
    fn haar_factors_are_unitary() {
        let mut rng = sample_rng(7, 0);
        for d in [2, 3, 4] {
            let u = haar_unitary(d, &mut rng);
            let err = crate::operator::max_abs(&(u.adjoint() * &u - CMatrix::identity(d, d)));
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn local_unitary_is_a_tensor_product() {
        let p = qubit(2);
        let u = haar_local_unitary(&p, 3, 5);
        let mut rng = sample_rng(3, 5);
        let factors = haar_local_factors(&p, &mut rng);
        let err = crate::operator::max_abs(&(u.matrix() - kron_all(&factors)));
        assert_eq!(err, 0.0);
    }

    #[test]
    fn single_qubit_without_layers() {
        let p = qubit(1);
        let h = DenseOperator::new(pauli('Z'), p.clone()).unwrap();
        let spec = LayeredCircuitSpec::new(zero_state(&p), vec![], h).unwrap();
        let est = estimate_variance(&spec, 20_000, 11).unwrap();
        assert!(est.z_score(1.0 / 3.0) < 4.0, "{est:?}");
        assert!(est.mean.abs() < 4.0 * est.standard_error_of_mean);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let p = qubit(2);
        let h = DenseOperator::new(crate::operator::pauli_string("ZZ").unwrap(), p.clone()).unwrap();
        let spec = LayeredCircuitSpec::homogeneous(
            zero_state(&p),
            Channel::unitary(crate::gates::cnot()).unwrap(),
            2,
            h,
        )
        .unwrap();
        let a = estimate_variance(&spec, 200, 5).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| estimate_variance(&spec, 200, 5).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_small_runs_and_oversized_systems() {
        let p = qubit(1);
        let h = DenseOperator::new(pauli('Z'), p.clone()).unwrap();
        let spec = LayeredCircuitSpec::new(zero_state(&p), vec![], h).unwrap();
        assert!(estimate_variance(&spec, 10, 0).is_err());
        let capped = spec.with_simulation_cap(1);
        assert!(matches!(
            estimate_variance(&capped, 100, 0),
            Err(Error::SimulationCap { .. })
        ));
    }

    #[test]
    fn random_kraus_is_trace_preserving() {
        let mut rng = sample_rng(1, 0);
        let ops = random_kraus(3, 4, &mut rng);
        let sum = ops.iter().fold(CMatrix::zeros(3, 3), |acc, k| acc + k.adjoint() * k);
        assert!(crate::operator::max_abs(&(sum - CMatrix::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn gauss_hermite_moments() {
        let nodes = gauss_hermite_normal(8).unwrap();
        let moment = |k: i32| nodes.iter().map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((moment(0) - 1.0).abs() < 1e-12);
        assert!(moment(1).abs() < 1e-12);
        assert!((moment(2) - 1.0).abs() < 1e-12);
        assert!((moment(4) - 3.0).abs() < 1e-11);
        assert!((moment(6) - 15.0).abs() < 1e-10);
    }

    #[test]
    fn generator_exponential() {
        let exp = GeneratorExp::new(&pauli('X')).unwrap();
        let u = exp.unitary(0.3);
        let expected = crate::gates::rx(0.6);
        assert!(crate::operator::max_abs(&(u - expected)) < 1e-12);
        assert!(GeneratorExp::new(&(pauli('X') * C64::new(0.0, 1.0))).is_err());
    }
}
