//! Hidden Markov machinery shared by the bar-pointer tracker and the
//! activation decoders: a discretized cyclic phase/tempo state space, a
//! sparse transition structure, exact Viterbi in the log domain, and an
//! exhaustive reference decoder for validation.

use crate::error::{Error, Result};

/// Sparse transition structure stored per *target* state (CSR-like), with
/// incoming edges sorted by source index.
#[derive(Debug, Clone)]
pub struct Transitions {
    n_states: usize,
    offsets: Vec<usize>,
    sources: Vec<u32>,
    log_probs: Vec<f64>,
}

impl Transitions {
    /// Build from `(from, to, probability)` edges.
    pub fn from_edges(n_states: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::InvalidInput("state space must be non-empty".into()));
        }
        let mut by_target: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_states];
        for &(from, to, p) in edges {
            if from >= n_states || to >= n_states {
                return Err(Error::InvalidInput(format!(
                    "edge ({from}, {to}) outside state space of {n_states}"
                )));
            }
            if p > 0.0 {
                by_target[to].push((from as u32, p.ln()));
            }
        }
        let mut offsets = Vec::with_capacity(n_states + 1);
        let mut sources = Vec::new();
        let mut log_probs = Vec::new();
        offsets.push(0);
        for mut incoming in by_target {
            incoming.sort_by_key(|&(src, _)| src);
            for (src, lp) in incoming {
                sources.push(src);
                log_probs.push(lp);
            }
            offsets.push(sources.len());
        }
        Ok(Self {
            n_states,
            offsets,
            sources,
            log_probs,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Sum of outgoing probabilities per source state (diagnostic).
    pub fn outgoing_sums(&self) -> Vec<f64> {
        let mut sums = vec![0f64; self.n_states];
        for (idx, &src) in self.sources.iter().enumerate() {
            sums[src as usize] += self.log_probs[idx].exp();
        }
        sums
    }
}

/// A decoded state path and its log probability.
#[derive(Debug, Clone)]
pub struct ViterbiPath {
    pub states: Vec<usize>,
    pub log_prob: f64,
}

/// Exact max-probability path in the log domain.
///
/// `fill_obs(t, out)` must write the per-state observation log-likelihoods of
/// frame `t` into `out`. Ties are broken toward the lower state index, both
/// per step (lowest source wins) and at the final frame.
pub fn viterbi<F>(
    trans: &Transitions,
    initial_log: &[f64],
    n_frames: usize,
    mut fill_obs: F,
) -> Result<ViterbiPath>
where
    F: FnMut(usize, &mut [f64]),
{
    let n = trans.n_states;
    if n_frames == 0 {
        return Err(Error::InvalidInput("need at least one frame".into()));
    }
    if initial_log.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "initial distribution has {} entries for {} states",
            initial_log.len(),
            n
        )));
    }

    let mut obs = vec![0f64; n];
    let mut delta = vec![0f64; n];
    let mut delta_next = vec![0f64; n];
    let mut backptr = vec![0u32; n.saturating_mul(n_frames.saturating_sub(1))];

    fill_obs(0, &mut obs);
    for s in 0..n {
        delta[s] = initial_log[s] + obs[s];
    }
    check_reachable(&delta, 0)?;

    for t in 1..n_frames {
        fill_obs(t, &mut obs);
        let bp = &mut backptr[(t - 1) * n..t * n];
        for to in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut best_src = 0u32;
            for e in trans.offsets[to]..trans.offsets[to + 1] {
                let src = trans.sources[e];
                let cand = delta[src as usize] + trans.log_probs[e];
                if cand > best {
                    best = cand;
                    best_src = src;
                }
            }
            delta_next[to] = best + obs[to];
            bp[to] = best_src;
        }
        std::mem::swap(&mut delta, &mut delta_next);
        check_reachable(&delta, t)?;
    }

    let mut last = 0usize;
    let mut best = f64::NEG_INFINITY;
    for (s, &d) in delta.iter().enumerate() {
        if d > best {
            best = d;
            last = s;
        }
    }

    let mut states = vec![0usize; n_frames];
    states[n_frames - 1] = last;
    for t in (1..n_frames).rev() {
        last = backptr[(t - 1) * n + last] as usize;
        states[t - 1] = last;
    }
    Ok(ViterbiPath {
        states,
        log_prob: best,
    })
}

fn check_reachable(delta: &[f64], frame: usize) -> Result<()> {
    if delta.iter().all(|d| *d == f64::NEG_INFINITY || d.is_nan()) {
        Err(Error::ImpossibleObservation(format!(
            "no state has finite probability at frame {frame}"
        )))
    } else {
        Ok(())
    }
}

/// Discretized cyclic phase/tempo state space: positions `m` in `[0, M)`,
/// integer tempo increments, `m' = (m + tempo) mod M` per frame. Tempo stays
/// with probability `1 - tempo_change_prob` and moves to an adjacent tempo
/// with `tempo_change_prob / 2` each, renormalized at the range edges.
///
/// State index layout is tempo-major: `state = tempo_idx * M + m`.
#[derive(Debug, Clone)]
pub struct PhaseStateSpace {
    pub n_positions: usize,
    pub tempos: Vec<usize>,
    pub tempo_change_prob: f64,
}

impl PhaseStateSpace {
    pub fn new(n_positions: usize, tempos: Vec<usize>, tempo_change_prob: f64) -> Result<Self> {
        if n_positions == 0 {
            return Err(Error::InvalidInput("need at least one position bin".into()));
        }
        if tempos.is_empty() {
            return Err(Error::InvalidInput("need at least one tempo bin".into()));
        }
        if tempos.windows(2).any(|w| w[1] <= w[0]) || tempos[0] == 0 {
            return Err(Error::InvalidInput(
                "tempos must be strictly increasing positive increments".into(),
            ));
        }
        if !(0.0..1.0).contains(&tempo_change_prob) {
            return Err(Error::InvalidInput(
                "tempo_change_prob must be in [0, 1)".into(),
            ));
        }
        Ok(Self {
            n_positions,
            tempos,
            tempo_change_prob,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_positions * self.tempos.len()
    }

    pub fn state_index(&self, tempo_idx: usize, position: usize) -> usize {
        tempo_idx * self.n_positions + position
    }

    pub fn position_of(&self, state: usize) -> usize {
        state % self.n_positions
    }

    pub fn tempo_idx_of(&self, state: usize) -> usize {
        state / self.n_positions
    }

    /// Tempo moves from a given tempo index: `(target_idx, probability)`.
    fn tempo_moves(&self, ti: usize) -> Vec<(usize, f64)> {
        let p = self.tempo_change_prob;
        let n = self.tempos.len();
        let mut moves = vec![(ti, 1.0 - p)];
        if ti > 0 {
            moves.push((ti - 1, p / 2.0));
        }
        if ti + 1 < n {
            moves.push((ti + 1, p / 2.0));
        }
        let total: f64 = moves.iter().map(|&(_, q)| q).sum();
        for m in &mut moves {
            m.1 /= total;
        }
        moves
    }

    /// Materialize the sparse transition structure.
    pub fn transitions(&self) -> Result<Transitions> {
        let m_count = self.n_positions;
        let mut edges = Vec::with_capacity(self.n_states() * 3);
        for ti in 0..self.tempos.len() {
            let tau = self.tempos[ti];
            let moves = self.tempo_moves(ti);
            for m in 0..m_count {
                let m_next = (m + tau) % m_count;
                let from = self.state_index(ti, m);
                for &(tj, q) in &moves {
                    edges.push((from, self.state_index(tj, m_next), q));
                }
            }
        }
        Transitions::from_edges(self.n_states(), &edges)
    }

    /// Uniform initial distribution in the log domain.
    pub fn uniform_initial_log(&self) -> Vec<f64> {
        vec![-(self.n_states() as f64).ln(); self.n_states()]
    }
}

/// Exhaustive reference decoding: enumerates every path and keeps the best,
/// with the same accumulation order and tie-breaking (reversed-path
/// lexicographic minimum) as [`viterbi`]. Exponential cost, for validation
/// on tiny instances only.
pub mod exhaustive {
    /// `trans_log[from][to]` is the log transition probability. Returns the
    /// best path and its log probability.
    pub fn best_path(
        n_states: usize,
        initial_log: &[f64],
        trans_log: &[Vec<f64>],
        obs_log: &[Vec<f64>],
    ) -> (Vec<usize>, f64) {
        let n_frames = obs_log.len();
        assert!(n_frames >= 1 && n_states >= 1);
        let mut best_score = f64::NEG_INFINITY;
        let mut best_path: Vec<usize> = Vec::new();
        let mut path = vec![0usize; n_frames];
        loop {
            let mut score = initial_log[path[0]] + obs_log[0][path[0]];
            for t in 1..n_frames {
                score = (score + trans_log[path[t - 1]][path[t]]) + obs_log[t][path[t]];
            }
            let better = score > best_score
                || (score == best_score && reversed_less(&path, &best_path));
            if better {
                best_score = score;
                best_path = path.clone();
            }
            // advance to the next path in lexicographic order
            let mut i = n_frames;
            loop {
                if i == 0 {
                    return (best_path, best_score);
                }
                i -= 1;
                path[i] += 1;
                if path[i] < n_states {
                    break;
                }
                path[i] = 0;
            }
        }
    }

    fn reversed_less(a: &[usize], b: &[usize]) -> bool {
        if b.is_empty() {
            return true;
        }
        for (x, y) in a.iter().rev().zip(b.iter().rev()) {
            if x != y {
                return x < y;
            }
        }
        false
    }
}
