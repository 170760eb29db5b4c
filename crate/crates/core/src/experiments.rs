//! Building blocks of the noise-scaling experiments: the entangler catalog,
//! the ZZ-chain observable and the replacement-noise channel around them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channels::Channel;
use crate::error::{invalid, Result};
use crate::gates;
use crate::locality::{weighted_dot, LocalityVector};
use crate::ltm::{ltm_exact, replacement_noise_ltm, Ltm};
use crate::operator::{pauli_string, CMatrix, DenseOperator};
use crate::partition::SubsystemPartition;

/// Default rotation angle of the controlled-RX cascade.
pub const DEFAULT_CRX_THETA: f64 = PI / 20.0;

/// Unitary entanglers used between the local layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Entangler {
    /// Two consecutive CNOT ladders; mixes locality quickly.
    CnotDoubleCascade,
    /// One ladder of controlled RX(θ) gates; mixes locality slowly.
    CrxCascade { theta: f64 },
    /// A single SWAP of the first two qubits.
    Swap,
}

impl Entangler {
    pub fn crx_default() -> Self {
        Entangler::CrxCascade {
            theta: DEFAULT_CRX_THETA,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Entangler::CnotDoubleCascade => "cnot-double-cascade",
            Entangler::CrxCascade { .. } => "crx-cascade",
            Entangler::Swap => "swap",
        }
    }

    pub fn channel(&self, n: usize) -> Result<Channel> {
        match *self {
            Entangler::CnotDoubleCascade => gates::cnot_double_cascade(n),
            Entangler::CrxCascade { theta } => gates::crx_cascade(n, theta),
            Entangler::Swap => {
                if n < 2 {
                    return invalid("SWAP needs at least two qubits");
                }
                gates::gate(vec![0, 1], gates::swap())
            }
        }
    }
}

/// Nearest-neighbour bonds of the ZZ chain: a ring for `n ≥ 3`, one bond for
/// `n = 2`.
pub fn zz_bonds(n: usize) -> Result<Vec<(usize, usize)>> {
    match n {
        0 | 1 => invalid("a ZZ chain needs at least two qubits"),
        2 => Ok(vec![(0, 1)]),
        _ => Ok((0..n).map(|k| (k, (k + 1) % n)).collect()),
    }
}

/// `H = h Σ_bonds Z_a Z_b` on `n` qubits.
pub fn zz_chain(n: usize, h: f64) -> Result<DenseOperator> {
    let partition = SubsystemPartition::qubits(n)?;
    let d = partition.dim();
    let mut m = CMatrix::zeros(d, d);
    for (a, b) in zz_bonds(n)? {
        let label: String = (0..n).map(|k| if k == a || k == b { 'Z' } else { 'I' }).collect();
        m += pauli_string(&label)?;
    }
    DenseOperator::new(m.scale(h), partition)
}

/// The coupling `h` for which `(ℓ_GHZ, ℓ_H) = 1`. For `n ≥ 3` each bond
/// contributes `h²/9`, so `h = 3/√n`; two qubits also pick up the `XX` and
/// `YY` weight of the GHZ state.
pub fn zz_unit_coupling(n: usize) -> Result<f64> {
    let bonds = zz_bonds(n)?.len() as f64;
    Ok(if n == 2 { 3f64.sqrt() } else { 3.0 / bonds.sqrt() })
}

/// Adjoint LTM of `(1−p)·E + p·Tr[·]ρ̃` for a unitary entangler `E`, assembled
/// from the entangler's own LTM.
pub fn replacement_ltm(p: f64, entangler_ltm: &Ltm, fixed_point: &LocalityVector) -> Result<Ltm> {
    replacement_noise_ltm(p, entangler_ltm, fixed_point)
}

/// The channel `(1−p)·E + p·Tr[·]ρ̃` itself, for simulation.
pub fn replacement_channel(p: f64, entangler: Channel, fixed_point: &DenseOperator) -> Result<Channel> {
    Channel::mixture_with_replacement(p, fixed_point.matrix().clone(), entangler)
}

/// Everything the analytic noise-scaling path needs for one entangler.
#[derive(Debug, Clone)]
pub struct NoiseScalingSetup {
    pub partition: SubsystemPartition,
    pub entangler: Entangler,
    pub entangler_ltm: Ltm,
    pub fixed_point: DenseOperator,
    pub fixed_point_locality: LocalityVector,
    pub observable: DenseOperator,
    pub observable_locality: LocalityVector,
    /// `(ℓ_ρ̃, ℓ_H)` over traceless sectors, the `p = 1` deep variance.
    pub normalization: f64,
}

impl NoiseScalingSetup {
    /// GHZ fixed point and ZZ chain with coupling `h`.
    pub fn ghz_zz(n: usize, entangler: Entangler, h: f64) -> Result<Self> {
        let partition = SubsystemPartition::qubits(n)?;
        let fixed_point = crate::operator::ghz_state(&partition)?;
        let observable = zz_chain(n, h)?;
        Self::new(entangler, fixed_point, observable)
    }

    pub fn new(entangler: Entangler, fixed_point: DenseOperator, observable: DenseOperator) -> Result<Self> {
        let partition = fixed_point.partition().clone();
        partition.ensure_same(observable.partition())?;
        let n = partition.num_subsystems();
        if !partition.is_qubits() {
            return invalid("the entangler catalog acts on qubits");
        }
        let entangler_ltm = ltm_exact(&entangler.channel(n)?, true, &partition)?;
        let fixed_point_locality = LocalityVector::from_operator(&fixed_point)?;
        let observable_locality = LocalityVector::from_operator(&observable)?;
        let normalization = weighted_dot(
            &fixed_point_locality.traceless_part(),
            &observable_locality.traceless_part(),
        )?;
        Ok(NoiseScalingSetup {
            partition,
            entangler,
            entangler_ltm,
            fixed_point,
            fixed_point_locality,
            observable,
            observable_locality,
            normalization,
        })
    }

    /// Adjoint LTM of the noisy intermediate channel at strength `p`.
    pub fn noisy_ltm(&self, p: f64) -> Result<Ltm> {
        replacement_ltm(p, &self.entangler_ltm, &self.fixed_point_locality)
    }

    pub fn noisy_channel(&self, p: f64) -> Result<Channel> {
        let n = self.partition.num_subsystems();
        replacement_channel(p, self.entangler.channel(n)?, &self.fixed_point)
    }
}
