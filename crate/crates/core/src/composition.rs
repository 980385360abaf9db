//! Compositional calculus for independent serial models: truth functions
//! compose by Mellin convolution, conjunctions become products of suprema
//! and disjunctions become maxima.

use serde::{Deserialize, Serialize};

use crate::error::{FbstError, Result};
use crate::truth::{condense, LadderOrigin, TruthLadder};

/// Default cap on enumerated atom pairs per convolution.
pub const DEFAULT_PAIR_BUDGET: usize = 1 << 20;

/// Mellin convolution with the default pair budget.
pub fn mellin_convolve(w1: &TruthLadder, w2: &TruthLadder, n_max: usize) -> TruthLadder {
    mellin_convolve_with_budget(w1, w2, n_max, DEFAULT_PAIR_BUDGET)
}

/// Truth function of the product of two independent surprise values.
///
/// Log-values add and masses multiply. Inputs whose pair count exceeds
/// `pair_budget` are condensed to `√pair_budget` points first. The result is
/// condensed to `n_max` points.
pub fn mellin_convolve_with_budget(
    w1: &TruthLadder,
    w2: &TruthLadder,
    n_max: usize,
    pair_budget: usize,
) -> TruthLadder {
    let (a, b) = if w1.len().saturating_mul(w2.len()) > pair_budget {
        let side = ((pair_budget as f64).sqrt() as usize).max(2);
        (condense(w1, side), condense(w2, side))
    } else {
        (w1.clone(), w2.clone())
    };
    let mut atoms = Vec::with_capacity(a.len() * b.len());
    for (va, ma) in a.atoms() {
        for (vb, mb) in b.atoms() {
            let mut v = va + vb;
            if v.is_nan() {
                // 0·∞ convention: a zero factor wins
                v = f64::NEG_INFINITY;
            }
            atoms.push((v, ma * mb));
        }
    }
    let ladder = TruthLadder::from_atoms(&mut atoms, LadderOrigin::Convolved)
        .expect("convolution of valid ladders yields valid atoms");
    condense(&ladder, n_max)
}

/// Convolves ladders along a fixed balanced tree, so the result does not
/// depend on scheduling.
pub fn convolve_all(ladders: &[TruthLadder], n_max: usize) -> Result<TruthLadder> {
    match ladders {
        [] => Err(FbstError::InvalidArgument("no ladders to convolve".into())),
        [one] => Ok(one.clone()),
        _ => {
            let mid = ladders.len() / 2;
            let (l, r) = rayon::join(
                || convolve_all(&ladders[..mid], n_max),
                || convolve_all(&ladders[mid..], n_max),
            );
            Ok(mellin_convolve(&l?, &r?, n_max))
        }
    }
}

/// One serial slot of a composite model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub ladder: TruthLadder,
    /// Global supremum of the component's log-surprise; used for slots a
    /// disjunct leaves unconstrained.
    pub log_s_max: Option<f64>,
}

/// `k` independent components and a `q × k` grid of constrained log-suprema.
/// Row `i` is the conjunction of its slots; rows are alternatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeStructure {
    components: Vec<Component>,
    grid: Vec<Vec<Option<f64>>>,
    joint: TruthLadder,
}

impl CompositeStructure {
    pub fn new(components: Vec<Component>, grid: Vec<Vec<Option<f64>>>, n_max: usize) -> Result<Self> {
        if components.is_empty() {
            return Err(FbstError::InvalidArgument("composite needs at least one component".into()));
        }
        if grid.is_empty() {
            return Err(FbstError::InvalidArgument("composite needs at least one disjunct".into()));
        }
        if let Some(i) = grid.iter().position(|r| r.len() != components.len()) {
            return Err(FbstError::InvalidArgument(format!(
                "disjunct {i} has {} slots for {} components",
                grid[i].len(),
                components.len()
            )));
        }
        let ladders: Vec<TruthLadder> = components.iter().map(|c| c.ladder.clone()).collect();
        let joint = convolve_all(&ladders, n_max)?;
        Ok(Self {
            components,
            grid,
            joint,
        })
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn q(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &[Vec<Option<f64>>] {
        &self.grid
    }

    /// Truth function of the product surprise of all components.
    pub fn joint_ladder(&self) -> &TruthLadder {
        &self.joint
    }

    /// `Σ_j log s*^(i,j)`, the log-supremum of the product surprise on row `i`.
    pub fn row_log_s_star(&self, row: usize) -> Result<f64> {
        let cells = self
            .grid
            .get(row)
            .ok_or_else(|| FbstError::InvalidArgument(format!("no disjunct {row}")))?;
        let mut total = 0.0;
        for (slot, cell) in cells.iter().enumerate() {
            let v = cell
                .or(self.components[slot].log_s_max)
                .ok_or(FbstError::MissingComponent { row, slot })?;
            total += v;
        }
        Ok(if total.is_nan() { f64::NEG_INFINITY } else { total })
    }
}

/// `ev = W_joint(Σ_j log s*^(i,j))` for row `i`.
pub fn conjunctive_evalue(c: &CompositeStructure, row: usize) -> Result<f64> {
    Ok(c.joint.eval(c.row_log_s_star(row)?))
}

/// Maximum of the conjunctive e-values across rows.
pub fn disjunctive_evalue(c: &CompositeStructure) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for row in 0..c.q() {
        best = best.max(conjunctive_evalue(c, row)?);
    }
    Ok(best)
}
