//! One replication of the discrete-event model.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::model::ValidatedModel;

use super::{PhaseSemantics, SimOptions};

/// Heap key ordered by `f64::total_cmp`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Due(f64, usize);

impl Eq for Due {}

impl PartialOrd for Due {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Due {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

#[derive(Debug, Clone)]
struct Customer {
    ty: usize,
    zeta: Vec<f64>,
    initial: bool,
}

/// Outgoing transitions of one phase in one environment state.
#[derive(Debug, Clone)]
struct PhaseRow {
    total: f64,
    /// `(cumulative rate, target phase, batch index)`; `None` is a hidden jump.
    moves: Vec<(f64, usize, Option<usize>)>,
}

/// Precomputed per-state phase tables.
pub(crate) struct Tables {
    rows: Vec<Vec<PhaseRow>>,
}

impl Tables {
    pub(crate) fn new(model: &ValidatedModel) -> Tables {
        let rows = (0..model.state_count())
            .map(|i| {
                let st = model.mmap(i);
                (0..st.phases())
                    .map(|j| {
                        let mut moves = Vec::new();
                        let mut acc = 0.0;
                        for l in 0..st.phases() {
                            let rate = st.d0[(j, l)];
                            if l != j && rate > 0.0 {
                                acc += rate;
                                moves.push((acc, l, None));
                            }
                        }
                        for (h, b) in st.batches.iter().enumerate() {
                            for l in 0..st.phases() {
                                let rate = b.matrix[(j, l)];
                                if rate > 0.0 {
                                    acc += rate;
                                    moves.push((acc, l, Some(h)));
                                }
                            }
                        }
                        PhaseRow { total: acc, moves }
                    })
                    .collect()
            })
            .collect();
        Tables { rows }
    }
}

/// Everything one replication reports.
#[derive(Debug, Clone, Default)]
pub struct RunRecord {
    /// Busy servers per type at the horizon (customers present at time zero excluded).
    pub terminal_busy: Vec<u64>,
    /// `alpha_c(T)` summed over types.
    pub terminal_alpha: Vec<f64>,
    /// Kept arrivals per type on `[0, T]` under thinning.
    pub kept: Vec<u64>,
    /// Time integrals over the averaging window: busy servers per type.
    pub area_busy: Vec<f64>,
    /// `area_alpha[r][c]`.
    pub area_alpha: Vec<Vec<f64>>,
    /// Time integral of `z^{N_s}` for each requested `z`.
    pub area_pgf: Vec<f64>,
    /// Customers destroyed by catastrophes inside the window, per type.
    pub destroyed_window: Vec<u64>,
    pub catastrophes_window: u64,
    pub catastrophes: u64,
    pub arrivals: Vec<u64>,
    pub served: Vec<u64>,
    pub destroyed: Vec<u64>,
    pub events: u64,
    pub conservation_checks: u64,
    pub conservation_violations: u64,
}

struct Path<'a, R> {
    model: &'a ValidatedModel,
    tables: &'a Tables,
    opts: &'a SimOptions,
    rng: R,
    env: usize,
    phase: usize,
    customers: Vec<Customer>,
    due: BinaryHeap<Reverse<Due>>,
    busy: Vec<u64>,
    busy_initial: Vec<u64>,
    alpha: Vec<Vec<f64>>,
    served_initial: Vec<u64>,
    destroyed_initial: Vec<u64>,
    rec: RunRecord,
}

impl<'a, R: Rng> Path<'a, R> {
    fn draw_phase(&mut self, i: usize) -> usize {
        let theta = self.model.phase_stationary(i).expect("checked before the run");
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for (j, p) in theta.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        theta.len() - 1
    }

    fn next_phase_event(&mut self, now: f64) -> f64 {
        let total = self.tables.rows[self.env][self.phase].total;
        if total <= 0.0 {
            return f64::INFINITY;
        }
        now + Exp::new(total).expect("positive rate").sample(&mut self.rng)
    }

    /// Integrates the piecewise constant state over `[a, b] ∩ [T/2, T]`.
    fn accumulate(&mut self, a: f64, b: f64) {
        let lo = a.max(self.opts.window_start());
        let hi = b.min(self.opts.horizon);
        if hi <= lo {
            return;
        }
        let dt = hi - lo;
        let total: u64 = self.busy.iter().sum();
        for r in 0..self.busy.len() {
            self.rec.area_busy[r] += self.busy[r] as f64 * dt;
            for (c, a) in self.alpha[r].iter().enumerate() {
                self.rec.area_alpha[r][c] += a * dt;
            }
        }
        for (k, &z) in self.opts.z_points.iter().enumerate() {
            self.rec.area_pgf[k] += z.powi(total as i32) * dt;
        }
    }

    fn check_conservation(&mut self) {
        let h0 = self.model.initial_customers();
        self.rec.conservation_checks += 1;
        let mut in_service = 0;
        let mut ok = true;
        for r in 0..self.busy.len() {
            let lhs = h0[r] as u64 + self.rec.arrivals[r];
            let rhs = self.rec.served[r]
                + self.served_initial[r]
                + self.busy[r]
                + self.busy_initial[r]
                + self.rec.destroyed[r]
                + self.destroyed_initial[r];
            ok &= lhs == rhs;
            in_service += self.busy[r] + self.busy_initial[r];
        }
        ok &= in_service == self.due.len() as u64;
        if !ok {
            self.rec.conservation_violations += 1;
        }
    }

    fn admit(&mut self, ty: usize, now: f64, initial: bool) {
        let res = self.model.resources();
        let service = res.service_law(ty, self.env).sample(&mut self.rng);
        let zeta = if initial {
            Vec::new()
        } else {
            res.arrival[ty].iter().map(|d| d.sample(&mut self.rng)).collect()
        };
        if initial {
            self.busy_initial[ty] += 1;
        } else {
            self.busy[ty] += 1;
            for (a, z) in self.alpha[ty].iter_mut().zip(&zeta) {
                *a += z;
            }
        }
        let id = self.customers.len();
        self.customers.push(Customer { ty, zeta, initial });
        self.due.push(Reverse(Due(now + service, id)));
    }

    fn complete(&mut self, id: usize) {
        let c = &self.customers[id];
        let ty = c.ty;
        if c.initial {
            self.busy_initial[ty] -= 1;
            self.served_initial[ty] += 1;
            return;
        }
        self.busy[ty] -= 1;
        self.rec.served[ty] += 1;
        if self.busy[ty] == 0 {
            self.alpha[ty].iter_mut().for_each(|a| *a = 0.0);
        } else {
            for (a, z) in self.alpha[ty].iter_mut().zip(&c.zeta) {
                *a = (*a - z).max(0.0);
            }
        }
    }

    fn flush(&mut self, now: f64) {
        let in_window = now >= self.opts.window_start() && now <= self.opts.horizon;
        for r in 0..self.busy.len() {
            self.rec.destroyed[r] += self.busy[r];
            self.destroyed_initial[r] += self.busy_initial[r];
            if in_window {
                self.rec.destroyed_window[r] += self.busy[r];
            }
            self.busy[r] = 0;
            self.busy_initial[r] = 0;
            self.alpha[r].iter_mut().for_each(|a| *a = 0.0);
        }
        self.rec.catastrophes += 1;
        if in_window {
            self.rec.catastrophes_window += 1;
        }
        self.customers.clear();
        self.due.clear();
    }
}

/// Runs one path on `[0, T]`. `rng` drives the dynamics, `thin_rng` the
/// Bernoulli retention of arrivals (so thinning leaves the path unchanged).
pub(crate) fn run_path<R: Rng, Q: Rng>(
    model: &ValidatedModel,
    tables: &Tables,
    opts: &SimOptions,
    rng: R,
    mut thin_rng: Q,
) -> Result<RunRecord> {
    let k = model.types();
    let comps = model.components();
    let env = model.environment();
    let mut p = Path {
        model,
        tables,
        opts,
        rng,
        env: 0,
        phase: 0,
        customers: Vec::new(),
        due: BinaryHeap::new(),
        busy: vec![0; k],
        busy_initial: vec![0; k],
        alpha: vec![vec![0.0; comps]; k],
        served_initial: vec![0; k],
        destroyed_initial: vec![0; k],
        rec: RunRecord {
            terminal_busy: vec![0; k],
            terminal_alpha: vec![0.0; comps],
            kept: vec![0; k],
            area_busy: vec![0.0; k],
            area_alpha: vec![vec![0.0; comps]; k],
            area_pgf: vec![0.0; opts.z_points.len()],
            destroyed_window: vec![0; k],
            arrivals: vec![0; k],
            served: vec![0; k],
            destroyed: vec![0; k],
            ..RunRecord::default()
        },
    };

    let u: f64 = p.rng.random();
    let mut acc = 0.0;
    p.env = env.state_count() - 1;
    for (i, w) in env.initial().iter().enumerate() {
        acc += w;
        if u < acc {
            p.env = i;
            break;
        }
    }
    p.phase = p.draw_phase(p.env);
    for (r, &h) in model.initial_customers().iter().enumerate() {
        for _ in 0..h {
            p.admit(r, 0.0, true);
        }
    }
    let horizon = opts.horizon;
    let mut now = 0.0;
    let mut next_env = env.sample_transition(p.env, &mut p.rng);
    let mut env_at = next_env.map_or(f64::INFINITY, |(_, s)| s);
    let mut phase_at = p.next_phase_event(now);

    loop {
        let service_at = p.due.peek().map_or(f64::INFINITY, |Reverse(d)| d.0);
        let t = phase_at.min(service_at).min(env_at);
        if t > horizon {
            p.accumulate(now, horizon);
            break;
        }
        p.accumulate(now, t);
        now = t;
        p.rec.events += 1;
        if p.rec.events > opts.event_cap {
            return Err(Error::ExplosionGuard(opts.event_cap));
        }
        if t == env_at {
            p.flush(now);
            let (to, _) = next_env.expect("finite epoch has a target");
            p.env = to;
            if opts.phase == PhaseSemantics::Reset {
                p.phase = p.draw_phase(to);
            }
            next_env = env.sample_transition(to, &mut p.rng);
            env_at = next_env.map_or(f64::INFINITY, |(_, s)| now + s);
            phase_at = p.next_phase_event(now);
        } else if t == service_at {
            let Reverse(Due(_, id)) = p.due.pop().expect("peeked");
            p.complete(id);
        } else {
            let row = &tables.rows[p.env][p.phase];
            let u = p.rng.random::<f64>() * row.total;
            let pick = row.moves.iter().position(|m| u < m.0).unwrap_or(row.moves.len() - 1);
            let (_, to, batch) = row.moves[pick];
            if let Some(h) = batch {
                let label = model.mmap(p.env).batches[h].label.clone();
                for (r, &n) in label.iter().enumerate() {
                    for _ in 0..n {
                        p.rec.arrivals[r] += 1;
                        if let Some(keep) = &opts.thinning {
                            if thin_rng.random::<f64>() < keep[r] {
                                p.rec.kept[r] += 1;
                            }
                        }
                        p.admit(r, now, false);
                    }
                }
            }
            p.phase = to;
            phase_at = p.next_phase_event(now);
        }
        p.check_conservation();
    }
    p.rec.terminal_busy = p.busy.clone();
    for c in 0..comps {
        p.rec.terminal_alpha[c] = (0..k).map(|r| p.alpha[r][c]).sum();
    }
    Ok(p.rec)
}
