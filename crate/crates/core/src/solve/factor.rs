//! Dense real-valued factors over discrete nodes and sum-product elimination.

use crate::deploy::NodeId;

/// A table over the joint states of `scope`, last scope entry varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<NodeId>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<NodeId>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(scope.len(), cards.len());
        assert_eq!(values.len(), cards.iter().product::<usize>(), "table size mismatch");
        debug_assert!(
            scope.iter().enumerate().all(|(i, v)| !scope[..i].contains(v)),
            "repeated variable in scope"
        );
        Factor { scope, cards, values }
    }

    pub fn scalar(value: f64) -> Self {
        Factor { scope: Vec::new(), cards: Vec::new(), values: vec![value] }
    }

    pub fn scope(&self) -> &[NodeId] {
        &self.scope
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contains(&self, var: NodeId) -> bool {
        self.scope.contains(&var)
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.scope.len()];
        for i in (0..self.scope.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    /// Pointwise product over the union of both scopes.
    pub fn product(&self, other: &Factor) -> Factor {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.scope.iter().zip(&other.cards) {
            if !scope.contains(v) {
                scope.push(*v);
                cards.push(*c);
            }
        }
        let project = |f: &Factor| -> Vec<usize> {
            let strides = f.strides();
            scope
                .iter()
                .map(|v| f.scope.iter().position(|w| w == v).map_or(0, |i| strides[i]))
                .collect()
        };
        let (sa, sb) = (project(self), project(other));
        let total: usize = cards.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut assignment = vec![0usize; scope.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..total {
            values.push(self.values[ia] * other.values[ib]);
            for k in (0..scope.len()).rev() {
                assignment[k] += 1;
                ia += sa[k];
                ib += sb[k];
                if assignment[k] < cards[k] {
                    break;
                }
                ia -= sa[k] * cards[k];
                ib -= sb[k] * cards[k];
                assignment[k] = 0;
            }
        }
        Factor { scope, cards, values }
    }

    /// Sums `var` out of the factor. Absent variables leave it unchanged.
    pub fn sum_out(&self, var: NodeId) -> Factor {
        let Some(pos) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..card {
                let base = (o * card + k) * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        Factor { scope, cards, values }
    }

    /// Re-lays the factor over `scope`, which must contain every variable of
    /// this factor; variables it does not mention are broadcast.
    pub fn arrange(&self, scope: &[NodeId], cards: &[usize]) -> Factor {
        assert!(self.scope.iter().all(|v| scope.contains(v)), "target scope too small");
        let strides = self.strides();
        let map: Vec<usize> = scope
            .iter()
            .map(|v| self.scope.iter().position(|w| w == v).map_or(0, |i| strides[i]))
            .collect();
        let total: usize = cards.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut assignment = vec![0usize; scope.len()];
        let mut idx = 0usize;
        for _ in 0..total {
            values.push(self.values[idx]);
            for k in (0..scope.len()).rev() {
                assignment[k] += 1;
                idx += map[k];
                if assignment[k] < cards[k] {
                    break;
                }
                idx -= map[k] * cards[k];
                assignment[k] = 0;
            }
        }
        Factor { scope: scope.to_vec(), cards: cards.to_vec(), values }
    }
}

/// Sums every variable not in `keep` out of the product of `factors` and
/// returns the result laid out over `keep`. Elimination order is greedy by
/// the size of the intermediate factor.
pub fn eliminate(mut factors: Vec<Factor>, keep: &[NodeId], cards: &[usize]) -> Factor {
    loop {
        let mut candidates: Vec<NodeId> = factors
            .iter()
            .flat_map(|f| f.scope.iter().copied())
            .filter(|v| !keep.contains(v))
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        let Some(var) = candidates.into_iter().min_by_key(|&v| {
            let mut scope: Vec<NodeId> = factors
                .iter()
                .filter(|f| f.contains(v))
                .flat_map(|f| f.scope.iter().copied())
                .collect();
            scope.sort_unstable();
            scope.dedup();
            (scope.iter().map(|&w| cards[w]).product::<usize>(), v)
        }) else {
            break;
        };
        let (touching, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.contains(var));
        let joined = touching.iter().skip(1).fold(touching[0].clone(), |acc, f| acc.product(f));
        factors = rest;
        factors.push(joined.sum_out(var));
    }
    let joined = factors.iter().fold(Factor::scalar(1.0), |acc, f| acc.product(f));
    let keep_cards: Vec<usize> = keep.iter().map(|&v| cards[v]).collect();
    joined.arrange(keep, &keep_cards)
}
