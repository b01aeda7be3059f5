//! Closed-loop rollouts of the original map under a cell-wise policy, with
//! survival counts and a geometric decay fit.

use std::fmt::Write as _;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::{ControlGrid, Partition};
use crate::error::{Error, Result};
use crate::systems::SystemDef;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialConditions {
    /// One trajectory from the center of every non-attractor cell.
    CellCenters,
    /// Uniform draws over the state box.
    SeededUniform {
        count: usize,
        seed: u64,
    },
    Points(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutConfig {
    pub initial_conditions: InitialConditions,
    pub horizon: usize,
    /// Sup-norm dilation of the attractor cells defining the target set.
    pub epsilon_radius: f64,
    pub record_trajectories: bool,
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Validation("rollout horizon must be at least 1".into()));
        }
        if !(self.epsilon_radius.is_finite() && self.epsilon_radius >= 0.0) {
            return Err(Error::Validation(format!("epsilon_radius = {} must be >= 0", self.epsilon_radius)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryStatus {
    /// Entered the target set at the given step (0 = started inside).
    Absorbed(usize),
    /// Still outside the target set at the horizon.
    Survived,
    /// Reached a cell without an action at the given step.
    Lost(usize),
    /// Started in a cell without an action.
    Uncontrolled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub state: Vec<f64>,
    pub cell: usize,
    pub action: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    /// `survival_counts[n-1]`: controlled trajectories outside the target set
    /// after `n` steps.
    pub survival_counts: Vec<usize>,
    pub fitted_beta: f64,
    pub fitted_m: f64,
    pub fraction_stabilized: f64,
    pub trajectories: usize,
    pub absorbed: usize,
    pub lost: usize,
    pub uncontrolled: usize,
}

impl DecayReport {
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "trajectories = {}", self.trajectories);
        let _ = writeln!(s, "absorbed = {}", self.absorbed);
        let _ = writeln!(s, "lost = {}", self.lost);
        let _ = writeln!(s, "uncontrolled = {}", self.uncontrolled);
        let _ = writeln!(s, "fraction_stabilized = {:.6}", self.fraction_stabilized);
        let _ = writeln!(s, "fitted_beta = {:.6}", self.fitted_beta);
        let _ = writeln!(s, "fitted_m = {:.6}", self.fitted_m);
        let _ = writeln!(s, "horizon = {}", self.survival_counts.len());
        s
    }

    /// `step,surviving` lines for steps `1..=horizon`.
    pub fn csv(&self) -> String {
        let mut s = String::from("step,surviving\n");
        for (n, c) in self.survival_counts.iter().enumerate() {
            let _ = writeln!(s, "{},{}", n + 1, c);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutResult {
    pub report: DecayReport,
    pub statuses: Vec<TrajectoryStatus>,
    /// Visited states per trajectory, starting with the initial state.
    pub trajectories: Option<Vec<Vec<TrajectoryPoint>>>,
}

struct TargetSet {
    boxes: Vec<(Vec<f64>, Vec<f64>)>,
    widths: Vec<f64>,
    wrap: Vec<bool>,
    radius: f64,
}

impl TargetSet {
    fn new(partition: &Partition, radius: f64) -> Self {
        let sb = partition.state_box();
        let boxes = partition
            .attractor_cells()
            .map(|raw| {
                let (lo, w) = partition.raw_cell_bounds(raw);
                let hi = lo.iter().zip(&w).map(|(a, b)| a + b).collect();
                (lo, hi)
            })
            .collect();
        Self { boxes, widths: (0..sb.dim()).map(|d| sb.width(d)).collect(), wrap: sb.wrap().to_vec(), radius }
    }

    fn distance(&self, x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for d in 0..x.len() {
            let gap = |v: f64| (lo[d] - v).max(v - hi[d]).max(0.0);
            let mut dist = gap(x[d]);
            if self.wrap[d] {
                dist = dist.min(gap(x[d] + self.widths[d])).min(gap(x[d] - self.widths[d]));
            }
            worst = worst.max(dist);
        }
        worst
    }

    fn contains(&self, x: &[f64], cell: usize, attractor: usize) -> bool {
        if cell == attractor {
            return true;
        }
        self.radius > 0.0 && self.boxes.iter().any(|(lo, hi)| self.distance(x, lo, hi) <= self.radius)
    }
}

fn initial_states(partition: &Partition, ic: &InitialConditions) -> Result<Vec<Vec<f64>>> {
    Ok(match ic {
        InitialConditions::CellCenters => (0..partition.attractor_index()).map(|j| partition.cell_center(j)).collect(),
        InitialConditions::SeededUniform { count, seed } => {
            let sb = partition.state_box();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*count)
                .map(|_| (0..sb.dim()).map(|d| sb.lower()[d] + rng.gen::<f64>() * sb.width(d)).collect())
                .collect()
        }
        InitialConditions::Points(points) => {
            for p in points {
                partition.state_box().check(p)?;
            }
            points.clone()
        }
    })
}

/// Least-squares fit of `log c_n = log M + n log beta` over the tail of the
/// positive prefix of the survival counts: its second half when it has at
/// least four entries, all of it with two or three, none otherwise.
pub fn fit_geometric(counts: &[usize]) -> (f64, f64) {
    let positive = counts.iter().take_while(|&&c| c > 0).count();
    if positive < 2 {
        return (0.0, counts.first().map_or(0.0, |&c| c as f64));
    }
    let start = if positive >= 4 { positive / 2 } else { 0 };
    let pts: Vec<(f64, f64)> = (start..positive).map(|i| ((i + 1) as f64, (counts[i] as f64).ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    (slope.exp(), intercept.exp())
}

/// Iterates the true map from each initial state, applying the control of
/// the current cell, until the state enters the target set or the horizon
/// is reached.
pub fn rollout(
    system: &SystemDef,
    partition: &Partition,
    grid: &ControlGrid,
    policy: &[Option<usize>],
    config: &RolloutConfig,
) -> Result<RolloutResult> {
    config.validate()?;
    let attractor = partition.attractor_index();
    if policy.len() < attractor {
        return Err(Error::Dimension(format!(
            "policy covers {} cells, partition has {attractor} non-attractor cells",
            policy.len()
        )));
    }
    if let Some(a) = policy.iter().flatten().find(|&&a| a >= grid.len()) {
        return Err(Error::Dimension(format!("policy uses action {a}, grid has {}", grid.len())));
    }
    if grid.dim() != system.control_dim() {
        return Err(Error::Dimension(format!(
            "grid controls have {} entries, system expects {}",
            grid.dim(),
            system.control_dim()
        )));
    }
    let target = TargetSet::new(partition, config.epsilon_radius);
    let action_at = |cell: usize| if cell == attractor { None } else { policy[cell] };
    let starts = initial_states(partition, &config.initial_conditions)?;

    let horizon = config.horizon;
    let mut exits = vec![0usize; horizon + 1];
    let mut active_count = 0usize;
    let mut statuses = Vec::with_capacity(starts.len());
    let mut store = config.record_trajectories.then(Vec::new);

    for x0 in starts {
        let mut x = x0;
        let mut cell = partition.cell_of_unchecked(&x);
        let mut path = Vec::new();
        let record = |x: &[f64], cell: usize, path: &mut Vec<TrajectoryPoint>| {
            if config.record_trajectories {
                path.push(TrajectoryPoint { state: x.to_vec(), cell, action: action_at(cell) });
            }
        };
        record(&x, cell, &mut path);
        let status = if target.contains(&x, cell, attractor) {
            TrajectoryStatus::Absorbed(0)
        } else if action_at(cell).is_none() {
            TrajectoryStatus::Uncontrolled
        } else {
            active_count += 1;
            let mut status = TrajectoryStatus::Survived;
            for n in 1..=horizon {
                let a = action_at(cell).expect("active trajectories sit on assigned cells");
                x = system.evaluate_unchecked(&x, grid.value(a));
                cell = partition.cell_of_unchecked(&x);
                record(&x, cell, &mut path);
                if target.contains(&x, cell, attractor) {
                    status = TrajectoryStatus::Absorbed(n);
                    break;
                }
                if action_at(cell).is_none() {
                    status = TrajectoryStatus::Lost(n);
                    break;
                }
            }
            match status {
                TrajectoryStatus::Absorbed(n) | TrajectoryStatus::Lost(n) => exits[n] += 1,
                _ => {}
            }
            status
        };
        statuses.push(status);
        if let Some(s) = store.as_mut() {
            s.push(path);
        }
    }

    let mut survival_counts = Vec::with_capacity(horizon);
    let mut alive = active_count;
    for n in 1..=horizon {
        alive -= exits[n];
        survival_counts.push(alive);
    }
    let absorbed = statuses.iter().filter(|s| matches!(s, TrajectoryStatus::Absorbed(_))).count();
    let lost = statuses.iter().filter(|s| matches!(s, TrajectoryStatus::Lost(_))).count();
    let uncontrolled = statuses.iter().filter(|s| **s == TrajectoryStatus::Uncontrolled).count();
    let total = statuses.len();
    let (fitted_beta, fitted_m) = fit_geometric(&survival_counts);
    let report = DecayReport {
        survival_counts,
        fitted_beta,
        fitted_m,
        fraction_stabilized: if total == 0 { 1.0 } else { absorbed as f64 / total as f64 },
        trajectories: total,
        absorbed,
        lost,
        uncontrolled,
    };
    Ok(RolloutResult { report, statuses, trajectories: store })
}

/// Writes `traj_id,step,x1..xq,cell,action` rows with 1-based cell and
/// action indices; the action is empty on unassigned or attractor cells.
pub fn write_trajectories_csv<W: Write>(trajectories: &[Vec<TrajectoryPoint>], dim: usize, mut w: W) -> Result<()> {
    let coords: Vec<String> = (1..=dim).map(|d| format!("x{d}")).collect();
    writeln!(w, "traj_id,step,{},cell,action", coords.join(","))?;
    for (id, path) in trajectories.iter().enumerate() {
        for (step, p) in path.iter().enumerate() {
            let xs: Vec<String> = p.state.iter().map(|v| format!("{v}")).collect();
            let action = p.action.map(|a| (a + 1).to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", id + 1, step, xs.join(","), p.cell + 1, action)?;
        }
    }
    Ok(())
}
