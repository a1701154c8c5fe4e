//! Shared precomputation for the heavier stages: the enumerated state
//! space, the invariant-satisfying subset, and per-replica bit matrices of
//! the merge precondition over that subset. Built once, read by the
//! convergence, sequential and concurrent stages.

use std::sync::Arc;

use rayon::prelude::*;

use crate::model::{
    enumerate_states, DomainBounds, EvalCtx, ModelError, ObjectSpec, OpArgs, Predicate,
    StateSpace, StateValue,
};

/// A dense 0/1 matrix with `u64`-packed rows.
#[derive(Debug, Clone)]
pub struct BitMatrix {
    cols: usize,
    rows: Vec<Vec<u64>>,
}

impl BitMatrix {
    pub fn words_for(cols: usize) -> usize {
        cols.div_ceil(64)
    }

    pub fn from_rows(cols: usize, rows: Vec<Vec<u64>>) -> BitMatrix {
        debug_assert!(rows.iter().all(|r| r.len() == Self::words_for(cols)));
        BitMatrix { cols, rows }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i][j / 64] & (1u64 << (j % 64)) != 0
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.rows[i]
    }

    /// Count of set bits in the whole matrix.
    pub fn count_ones(&self) -> u64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|w| w.count_ones() as u64).sum::<u64>())
            .sum()
    }

    /// Pointwise AND with the transpose; requires a square matrix.
    pub fn and_transpose(&self) -> BitMatrix {
        debug_assert_eq!(self.cols, self.rows.len());
        let rows = (0..self.rows.len())
            .map(|i| {
                let mut row = self.rows[i].clone();
                for j in ones(&self.rows[i], self.cols) {
                    if !self.get(j, i) {
                        row[j / 64] &= !(1u64 << (j % 64));
                    }
                }
                row
            })
            .collect();
        BitMatrix::from_rows(self.cols, rows)
    }
}

/// Iterates the indices of set bits.
pub fn ones(words: &[u64], cols: usize) -> impl Iterator<Item = usize> + '_ {
    words
        .iter()
        .enumerate()
        .flat_map(|(wi, w)| {
            let mut w = *w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
        .filter(move |j| *j < cols)
}

pub fn and_words(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

pub fn and_not_words(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x & !y).collect()
}

pub fn popcount(words: &[u64]) -> u64 {
    words.iter().map(|w| w.count_ones() as u64).sum()
}

/// One operation instance: the operation's index in declaration order plus
/// resolved arguments.
pub type OpInstance = (usize, OpArgs);

pub struct Analysis {
    pub space: StateSpace,
    pub instances: Vec<OpInstance>,
    /// Indices into `space.states` of invariant-satisfying states, in
    /// enumeration order.
    pub valid: Vec<usize>,
    /// Per-replica merge-precondition matrix over `valid × valid`:
    /// `pm[me][i][j]` ⇔ `Pre_merge(valid[i], valid[j])` at that replica.
    /// Shared across replicas when the predicate never reads `me`.
    pub pm: Vec<Arc<BitMatrix>>,
    /// `pm[me] ∧ pm[me]ᵀ`: pairs compatible in both merge directions.
    pub pm_both: Vec<Arc<BitMatrix>>,
}

impl Analysis {
    pub fn build(
        spec: &ObjectSpec,
        bounds: &DomainBounds,
        _config: &super::config::CheckConfig,
    ) -> Result<Analysis, ModelError> {
        spec.require_complete()?;
        let space = enumerate_states(&spec.schema, bounds)?;
        let instances = spec.op_instances(bounds)?;

        let valid: Vec<usize> = space
            .states
            .par_iter()
            .enumerate()
            .map(|(i, state)| {
                EvalCtx::unary(spec, bounds, state, 0, &[])
                    .holds(&spec.invariant)
                    .map(|ok| (i, ok))
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .filter_map(|(i, ok)| ok.then_some(i))
            .collect();

        let pm_matrix = |me: usize| -> Result<BitMatrix, ModelError> {
            let rows = valid
                .par_iter()
                .map(|&i| {
                    let local = &space.states[i];
                    let mut row = vec![0u64; BitMatrix::words_for(valid.len())];
                    for (jj, &j) in valid.iter().enumerate() {
                        let remote = &space.states[j];
                        if EvalCtx::binary(spec, bounds, local, remote, me, &[])
                            .holds(&spec.pre_merge)?
                        {
                            row[jj / 64] |= 1u64 << (jj % 64);
                        }
                    }
                    Ok(row)
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            Ok(BitMatrix::from_rows(valid.len(), rows))
        };

        let me_free = !predicate_references_me(&spec.pre_merge);
        let mut pm = Vec::with_capacity(bounds.replica_count);
        for me in 0..bounds.replica_count {
            if me_free && me > 0 {
                pm.push(Arc::clone(&pm[0]));
            } else {
                pm.push(Arc::new(pm_matrix(me)?));
            }
        }
        let mut pm_both = Vec::with_capacity(pm.len());
        for (me, matrix) in pm.iter().enumerate() {
            if me_free && me > 0 {
                pm_both.push(Arc::clone(&pm_both[0]));
            } else {
                pm_both.push(Arc::new(matrix.and_transpose()));
            }
        }

        Ok(Analysis {
            space,
            instances,
            valid,
            pm,
            pm_both,
        })
    }

    pub fn state(&self, valid_idx: usize) -> &StateValue {
        &self.space.states[self.valid[valid_idx]]
    }

    /// Σ over replicas of single-orientation compatible pairs.
    pub fn valid_pair_count(&self) -> u64 {
        self.pm.iter().map(|m| m.count_ones()).sum()
    }
}

pub fn predicate_references_me(pred: &Predicate) -> bool {
    pred.clauses
        .iter()
        .any(|c| crate::model::expr_references_me(&c.expr))
}
