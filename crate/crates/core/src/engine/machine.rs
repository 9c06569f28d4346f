//! Coefficient storage plus the compiled tape, shared by planner and solver.

use statrs::function::gamma::gamma;

use super::plan::UpdateKind;
use super::spec::{DiffOrder, FractionalRule, ProblemSpec, VarKind};
use crate::expr::{NodeId, Tape, TapeBuilder, TransformError};

pub(crate) struct DiffSlot {
    pub slot: usize,
    pub shift: usize,
    pub kind: UpdateKind,
    pub rhs: NodeId,
    /// Coefficients `0..shift` fixed by initial data.
    pub seed: Vec<f64>,
}

pub(crate) struct AlgSlot {
    pub slot: usize,
    pub guess: f64,
}

pub(crate) struct Machine {
    pub tape: Tape,
    pub env: Vec<Vec<f64>>,
    pub diffs: Vec<DiffSlot>,
    pub algs: Vec<AlgSlot>,
    pub constraints: Vec<NodeId>,
    pub grid: u32,
}

impl UpdateKind {
    /// Multiplier taking the right-hand side coefficient at `j` to the
    /// variable's coefficient at `j + shift`.
    pub fn gain(&self, j: usize) -> f64 {
        match *self {
            UpdateKind::Integer { m, q } => {
                let x = j as f64 / q as f64;
                1.0 / (1..=m).map(|i| x + i as f64).product::<f64>()
            }
            UpdateKind::Fractional { p, q } => {
                let x = j as f64 / q as f64;
                gamma(1.0 + x) / gamma(1.0 + x + p as f64 / q as f64)
            }
            UpdateKind::IntegerIndex { p, q } => {
                let a = p as f64 / q as f64;
                gamma(1.0 + j as f64 * a) / gamma(1.0 + (j + 1) as f64 * a)
            }
        }
    }

    pub fn shift(&self) -> usize {
        match *self {
            UpdateKind::Integer { m, q } => (m * q) as usize,
            UpdateKind::Fractional { p, .. } => p as usize,
            UpdateKind::IntegerIndex { .. } => 1,
        }
    }
}

impl Machine {
    pub fn compile(spec: &ProblemSpec) -> Result<Self, TransformError> {
        let grid = spec.grid_denominator();
        let alpha = spec.effective_alpha();
        let names: Vec<String> = spec.variables.iter().map(|v| v.id.clone()).collect();
        let mut builder =
            TapeBuilder::new(&names, spec.expansion_point, grid).with_definitions(spec.definitions.clone());
        let mut diffs = Vec::new();
        let mut algs = Vec::new();
        for (slot, var) in spec.variables.iter().enumerate() {
            match var.kind {
                VarKind::Algebraic => algs.push(AlgSlot {
                    slot,
                    guess: var.initial.first().copied().unwrap_or(0.0),
                }),
                VarKind::Differential => {
                    let eq = spec.equation(&var.id).expect("validated spec");
                    let kind = match (eq.order, alpha) {
                        (DiffOrder::Alpha, Some(a)) => match spec.fractional_rule {
                            FractionalRule::CaputoGrid => UpdateKind::Fractional {
                                p: a.numer(),
                                q: a.denom(),
                            },
                            FractionalRule::IntegerIndex => UpdateKind::IntegerIndex {
                                p: a.numer(),
                                q: a.denom(),
                            },
                        },
                        (DiffOrder::Alpha, None) => UpdateKind::Integer { m: 1, q: grid },
                        (DiffOrder::Integer(m), _) => UpdateKind::Integer { m, q: grid },
                    };
                    let shift = kind.shift();
                    let mut seed = vec![0.0; shift];
                    match kind {
                        UpdateKind::Integer { q, .. } => {
                            // W(i q) = w^(i)(v0) / i!
                            let mut fact = 1.0;
                            for (i, eta) in var.initial.iter().enumerate() {
                                if i > 0 {
                                    fact *= i as f64;
                                }
                                seed[i * q as usize] = eta / fact;
                            }
                        }
                        UpdateKind::Fractional { .. } | UpdateKind::IntegerIndex { .. } => seed[0] = var.initial[0],
                    }
                    diffs.push(DiffSlot {
                        slot,
                        shift,
                        kind,
                        rhs: builder.add(&eq.rhs)?,
                        seed,
                    });
                }
            }
        }
        let constraints = spec
            .constraints
            .iter()
            .map(|c| builder.add(c))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            tape: builder.finish(),
            env: vec![Vec::new(); names.len()],
            diffs,
            algs,
            constraints,
            grid,
        })
    }

    pub fn max_shift(&self) -> usize {
        self.diffs.iter().map(|d| d.shift).max().unwrap_or(0)
    }

    pub fn min_shift(&self) -> usize {
        self.diffs.iter().map(|d| d.shift).min().unwrap_or(0)
    }

    /// Zeroes all storage to `capacity` coefficients, writes initial data and
    /// the algebraic guesses at index 0.
    pub fn reset(&mut self, capacity: usize) {
        for s in &mut self.env {
            s.clear();
            s.resize(capacity, 0.0);
        }
        for d in &self.diffs {
            self.env[d.slot][..d.shift].copy_from_slice(&d.seed);
        }
        for a in &self.algs {
            self.env[a.slot][0] = a.guess;
        }
        self.tape.truncate_state(0);
    }

    /// Explicit updates for right-hand side orders `from..=to`. Storage and
    /// tape must be valid below `from`.
    pub fn propagate(&mut self, from: usize, to: usize) -> Result<(), TransformError> {
        for j in from..=to {
            for d in &self.diffs {
                let target = j + d.shift;
                if target >= self.env[d.slot].len() {
                    continue;
                }
                let r = self.tape.coeff(d.rhs, j, &self.env)?;
                self.env[d.slot][target] = d.kind.gain(j) * r;
            }
        }
        Ok(())
    }

    pub fn constraint(&mut self, c: usize, j: usize) -> Result<f64, TransformError> {
        self.tape.coeff(self.constraints[c], j, &self.env)
    }
}
