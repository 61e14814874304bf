//! Dynamic programs over a linear-chain score lattice.
//!
//! Scores are log-potentials: `emissions[j][t]` for tag `t` at position `j`,
//! `start[t]` for the first position (previous tag is null) and
//! `pair[p * n_tags + t]` for tag `p` followed by tag `t`.

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy)]
pub struct Lattice<'a> {
    pub emissions: &'a [Vec<f64>],
    pub start: &'a [f64],
    pub pair: &'a [f64],
}

impl<'a> Lattice<'a> {
    pub fn n_tags(&self) -> usize {
        self.start.len()
    }

    pub fn len(&self) -> usize {
        self.emissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    fn trans(&self, prev: usize, cur: usize) -> f64 {
        self.pair[prev * self.n_tags() + cur]
    }

    pub fn path_score(&self, path: &[usize]) -> f64 {
        let mut s = 0.0;
        for (j, &t) in path.iter().enumerate() {
            s += self.emissions[j][t];
            s += if j == 0 {
                self.start[t]
            } else {
                self.trans(path[j - 1], t)
            };
        }
        s
    }

    /// Forward log-messages `alpha[j][t]`.
    fn forward(&self) -> Vec<Vec<f64>> {
        let k = self.n_tags();
        let mut alpha = Vec::with_capacity(self.len());
        alpha.push((0..k).map(|t| self.start[t] + self.emissions[0][t]).collect::<Vec<_>>());
        let mut buf = vec![0.0; k];
        for j in 1..self.len() {
            let prev: &Vec<f64> = &alpha[j - 1];
            let row = (0..k)
                .map(|t| {
                    for p in 0..k {
                        buf[p] = prev[p] + self.trans(p, t);
                    }
                    log_sum_exp(&buf) + self.emissions[j][t]
                })
                .collect();
            alpha.push(row);
        }
        alpha
    }

    fn backward(&self) -> Vec<Vec<f64>> {
        let k = self.n_tags();
        let n = self.len();
        let mut beta = vec![vec![0.0; k]; n];
        let mut buf = vec![0.0; k];
        for j in (0..n.saturating_sub(1)).rev() {
            for p in 0..k {
                for t in 0..k {
                    buf[t] = self.trans(p, t) + self.emissions[j + 1][t] + beta[j + 1][t];
                }
                beta[j][p] = log_sum_exp(&buf);
            }
        }
        beta
    }

    /// `log Z`: log-sum-exp of [`Self::path_score`] over every tag path.
    pub fn log_partition(&self) -> f64 {
        let alpha = self.forward();
        log_sum_exp(alpha.last().expect("non-empty lattice"))
    }

    /// Highest-scoring path. Ties go to the lowest tag index.
    pub fn viterbi(&self) -> (Vec<usize>, f64) {
        let k = self.n_tags();
        let n = self.len();
        let mut delta: Vec<f64> = (0..k).map(|t| self.start[t] + self.emissions[0][t]).collect();
        let mut back = vec![vec![0usize; k]; n];
        for (j, back_j) in back.iter_mut().enumerate().skip(1) {
            let mut next = vec![0.0; k];
            for t in 0..k {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for (p, &d) in delta.iter().enumerate() {
                    let s = d + self.trans(p, t);
                    if s > best {
                        best = s;
                        arg = p;
                    }
                }
                next[t] = best + self.emissions[j][t];
                back_j[t] = arg;
            }
            delta = next;
        }
        let mut best = f64::NEG_INFINITY;
        let mut last = 0;
        for (t, &s) in delta.iter().enumerate() {
            if s > best {
                best = s;
                last = t;
            }
        }
        let mut path = vec![0; n];
        path[n - 1] = last;
        for j in (1..n).rev() {
            path[j - 1] = back[j][path[j]];
        }
        (path, best)
    }

    pub fn marginals(&self) -> Marginals {
        let k = self.n_tags();
        let n = self.len();
        let alpha = self.forward();
        let beta = self.backward();
        let log_z = log_sum_exp(&alpha[n - 1]);
        let unary = (0..n)
            .map(|j| (0..k).map(|t| (alpha[j][t] + beta[j][t] - log_z).exp()).collect())
            .collect();
        let pairwise = (1..n)
            .map(|j| {
                let mut m = vec![0.0; k * k];
                for p in 0..k {
                    for t in 0..k {
                        m[p * k + t] =
                            (alpha[j - 1][p] + self.trans(p, t) + self.emissions[j][t] + beta[j][t] - log_z).exp();
                    }
                }
                m
            })
            .collect();
        Marginals { unary, pairwise, log_z }
    }
}

/// Posterior marginals from forward–backward.
#[derive(Debug, Clone)]
pub struct Marginals {
    /// `unary[j][t] = P(tag_j = t)`.
    pub unary: Vec<Vec<f64>>,
    /// `pairwise[j - 1][p * k + t] = P(tag_{j-1} = p, tag_j = t)` for `j >= 1`.
    pub pairwise: Vec<Vec<f64>>,
    pub log_z: f64,
}
