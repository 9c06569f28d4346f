//! Constraint shift probing and the per-order schedule.

use super::machine::Machine;
use super::spec::ProblemSpec;
use super::PlanError;

/// Order at which shifts are probed. Order 0 is avoided because some
/// coefficients only enter nonlinear terms through products with it.
const PROBE_ORDER: usize = 1;
const PROBE_STEP: f64 = 1e-3;
const SENSITIVITY_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateKind {
    /// `W(j + m q) = RHS(j) / Π_{i=1..m} (j/q + i)`.
    Integer { m: u32, q: u32 },
    /// `W(j + p) = RHS(j) Γ(1 + j/q) / Γ(1 + (j + p)/q)`.
    Fractional { p: u32, q: u32 },
    /// `W(j + 1) = RHS(j) Γ(1 + j α) / Γ(1 + (j + 1) α)` with `α = p/q`.
    IntegerIndex { p: u32, q: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRule {
    pub var: String,
    /// Index offset, in grid steps, between the right-hand side coefficient
    /// and the coefficient it determines.
    pub shift: usize,
    pub kind: UpdateKind,
}

/// Algebraic coefficient `U(k)` is fixed by constraint coefficient `k + shift`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintBinding {
    pub var: String,
    pub constraint: usize,
    pub shift: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    /// Newton solve of the bound constraints for these algebraic coefficients.
    Solve { vars: Vec<String> },
    /// Explicit update of a differential variable.
    Advance { var: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrencePlan {
    pub grid: u32,
    pub updates: Vec<UpdateRule>,
    pub bindings: Vec<ConstraintBinding>,
    /// Work done at every order, in sequence.
    pub schedule: Vec<Step>,
}

impl RecurrencePlan {
    pub fn max_shift(&self) -> usize {
        self.bindings.iter().map(|b| b.shift).max().unwrap_or(0)
    }

    pub fn binding(&self, var: &str) -> Option<&ConstraintBinding> {
        self.bindings.iter().find(|b| b.var == var)
    }
}

pub fn plan(spec: &ProblemSpec) -> Result<RecurrencePlan, PlanError> {
    let mut machine = Machine::compile(spec)?;
    plan_with(spec, &mut machine)
}

/// Constraint coefficients `k_p + s`, `s = 0..=cap`, with the given extra
/// coefficients written over the nominal state.
fn probe(
    m: &mut Machine,
    capacity: usize,
    cap: usize,
    perturb: &[(usize, usize, f64)],
) -> Result<Vec<Vec<f64>>, PlanError> {
    m.reset(capacity);
    for &(slot, idx, dx) in perturb {
        m.env[slot][idx] += dx;
    }
    m.propagate(0, PROBE_ORDER + cap)?;
    (0..m.constraints.len())
        .map(|c| {
            (0..=cap)
                .map(|s| m.constraint(c, PROBE_ORDER + s).map_err(PlanError::from))
                .collect()
        })
        .collect()
}

fn sensitivity(
    m: &mut Machine,
    capacity: usize,
    cap: usize,
    slot: usize,
    idx: usize,
) -> Result<Vec<Vec<f64>>, PlanError> {
    let plus = probe(m, capacity, cap, &[(slot, idx, PROBE_STEP)])?;
    let minus = probe(m, capacity, cap, &[(slot, idx, -PROBE_STEP)])?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(p, q)| p.iter().zip(q).map(|(a, b)| (a - b) / (2.0 * PROBE_STEP)).collect())
        .collect())
}

pub(crate) fn plan_with(spec: &ProblemSpec, m: &mut Machine) -> Result<RecurrencePlan, PlanError> {
    let dmax = m.max_shift();
    let cap = 2 * dmax + 2;
    let capacity = PROBE_ORDER + cap + dmax + 2;
    let name = |slot: usize| spec.variables[slot].id.clone();

    let updates = m
        .diffs
        .iter()
        .map(|d| UpdateRule {
            var: name(d.slot),
            shift: d.shift,
            kind: d.kind,
        })
        .collect();

    let alg_slots: Vec<usize> = m.algs.iter().map(|a| a.slot).collect();
    let mut taken = vec![false; m.constraints.len()];
    let mut bindings = Vec::new();
    for &slot in &alg_slots {
        let sens = sensitivity(m, capacity, cap, slot, PROBE_ORDER)?;
        let best = sens
            .iter()
            .enumerate()
            .filter(|(c, _)| !taken[*c])
            .filter_map(|(c, row)| row.iter().position(|d| d.abs() > SENSITIVITY_FLOOR).map(|s| (s, c)))
            .min();
        let (shift, constraint) = best.ok_or_else(|| PlanError::IndexTooHigh { var: name(slot), cap })?;
        taken[constraint] = true;
        bindings.push(ConstraintBinding {
            var: name(slot),
            constraint,
            shift,
        });
    }

    // the bound coefficient must not see algebraic coefficients of later orders
    for b in &bindings {
        for &slot in &alg_slots {
            for t in 1..=b.shift {
                let sens = sensitivity(m, capacity, cap, slot, PROBE_ORDER + t)?;
                if sens[b.constraint][b.shift].abs() > SENSITIVITY_FLOOR {
                    return Err(PlanError::Cyclic {
                        var: b.var.clone(),
                        constraint: b.constraint,
                    });
                }
            }
        }
    }

    let mut schedule = Vec::new();
    if !bindings.is_empty() {
        schedule.push(Step::Solve {
            vars: bindings.iter().map(|b| b.var.clone()).collect(),
        });
    }
    schedule.extend(m.diffs.iter().map(|d| Step::Advance { var: name(d.slot) }));

    Ok(RecurrencePlan {
        grid: m.grid,
        updates,
        bindings,
        schedule,
    })
}
