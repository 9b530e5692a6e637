//! Continuous-time user trajectories and daily activity schedules.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use super::world::{BusLine, Place};

pub const DAY_MS: u64 = 86_400_000;
const HOUR_MS: f64 = 3_600_000.0;
const WALK_MPS: f64 = 1.4;
const BIKE_MPS: f64 = 4.2;
const WALK_MAX_M: f64 = 1_200.0;
const BUS_ACCESS_M: f64 = 600.0;
const BUS_MIN_TRIP_M: f64 = 1_500.0;
const OUTDOOR_DAY_P: f64 = 0.85;

#[derive(Debug, Clone, PartialEq)]
pub enum Leg {
    /// Standing still; `place` is `None` at bus stops.
    Stay {
        x: f64,
        y: f64,
        t0: u64,
        t1: u64,
        place: Option<usize>,
    },
    Move {
        from: (f64, f64),
        to: (f64, f64),
        t0: u64,
        t1: u64,
    },
    Bus {
        line: usize,
        vehicle: usize,
        t0: u64,
        t1: u64,
    },
}

impl Leg {
    pub fn t0(&self) -> u64 {
        match *self {
            Leg::Stay { t0, .. } | Leg::Move { t0, .. } | Leg::Bus { t0, .. } => t0,
        }
    }

    pub fn t1(&self) -> u64 {
        match *self {
            Leg::Stay { t1, .. } | Leg::Move { t1, .. } | Leg::Bus { t1, .. } => t1,
        }
    }
}

/// Piecewise trajectory covering `[legs[0].t0, legs.last().t1]` without gaps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub legs: Vec<Leg>,
}

impl Trajectory {
    pub fn stationary(x: f64, y: f64, t0: u64, t1: u64) -> Self {
        Trajectory {
            legs: vec![Leg::Stay {
                x,
                y,
                t0,
                t1,
                place: None,
            }],
        }
    }

    fn leg_index(&self, t: u64) -> usize {
        let i = self.legs.partition_point(|l| l.t1() <= t);
        i.min(self.legs.len() - 1)
    }

    pub fn position_at(&self, t: u64, lines: &[BusLine], epoch_ms: u64) -> (f64, f64) {
        leg_position(&self.legs[self.leg_index(t)], t, lines, epoch_ms)
    }

    /// Place occupied at `t`, if the user is dwelling at one.
    pub fn place_at(&self, t: u64) -> Option<usize> {
        match self.legs[self.leg_index(t)] {
            Leg::Stay { place, .. } => place,
            _ => None,
        }
    }

    /// Milliseconds spent at each place within `[from, to)`.
    pub fn place_time(&self, from: u64, to: u64) -> Vec<(usize, u64)> {
        let mut acc: Vec<(usize, u64)> = Vec::new();
        for l in &self.legs {
            if let Leg::Stay {
                t0, t1, place: Some(p), ..
            } = *l
            {
                let a = t0.max(from);
                let b = t1.min(to);
                if b > a {
                    match acc.iter_mut().find(|(q, _)| *q == p) {
                        Some(e) => e.1 += b - a,
                        None => acc.push((p, b - a)),
                    }
                }
            }
        }
        acc
    }
}

/// Cursor for monotone-in-time position queries.
pub struct TrajectoryCursor<'a> {
    traj: &'a Trajectory,
    idx: usize,
}

impl<'a> TrajectoryCursor<'a> {
    pub fn new(traj: &'a Trajectory) -> Self {
        TrajectoryCursor { traj, idx: 0 }
    }

    pub fn position_at(&mut self, t: u64, lines: &[BusLine], epoch_ms: u64) -> (f64, f64) {
        let legs = &self.traj.legs;
        if self.idx >= legs.len() || legs[self.idx].t0() > t {
            self.idx = self.traj.leg_index(t);
        }
        while self.idx + 1 < legs.len() && legs[self.idx].t1() <= t {
            self.idx += 1;
        }
        leg_position(&legs[self.idx], t, lines, epoch_ms)
    }
}

fn leg_position(leg: &Leg, t: u64, lines: &[BusLine], epoch_ms: u64) -> (f64, f64) {
    match *leg {
        Leg::Stay { x, y, .. } => (x, y),
        Leg::Move { from, to, t0, t1 } => {
            if t1 <= t0 {
                return to;
            }
            let f = ((t.clamp(t0, t1) - t0) as f64) / ((t1 - t0) as f64);
            (from.0 + f * (to.0 - from.0), from.1 + f * (to.1 - from.1))
        }
        Leg::Bus { line, vehicle, .. } => lines[line].vehicle_position(vehicle, t, epoch_ms),
    }
}

/// Who a user is and where they go.
#[derive(Debug, Clone, PartialEq)]
pub struct Routine {
    pub home: usize,
    /// Campus or workplace; visited on most days.
    pub day_place: usize,
    /// Other anchors with visit weights.
    pub anchors: Vec<(usize, f64)>,
    /// Outdoor spot (park, sports ground) visited on some days.
    pub outdoor: Option<usize>,
    pub bus_rider: bool,
    pub leave_home_h: f64,
    pub day_stay_h: f64,
}

impl Routine {
    pub fn places(&self) -> Vec<usize> {
        let mut v = vec![self.home, self.day_place];
        v.extend(self.anchors.iter().map(|a| a.0));
        v.extend(self.outdoor);
        v
    }
}

struct Builder<'a> {
    legs: Vec<Leg>,
    pos: (f64, f64),
    t: u64,
    places: &'a [Place],
    lines: &'a [BusLine],
    epoch_ms: u64,
}

impl Builder<'_> {
    fn stay(&mut self, place: Option<usize>, spot: (f64, f64), until: u64) {
        let until = until.max(self.t);
        if until > self.t || self.legs.is_empty() {
            self.legs.push(Leg::Stay {
                x: spot.0,
                y: spot.1,
                t0: self.t,
                t1: until,
                place,
            });
        }
        self.pos = spot;
        self.t = until;
    }

    fn move_to(&mut self, to: (f64, f64), speed: f64) {
        let d = (to.0 - self.pos.0).hypot(to.1 - self.pos.1);
        let dt = ((d / speed) * 1000.0).round().max(1.0) as u64;
        self.legs.push(Leg::Move {
            from: self.pos,
            to,
            t0: self.t,
            t1: self.t + dt,
        });
        self.pos = to;
        self.t += dt;
    }

    fn travel(&mut self, to: (f64, f64), bus_rider: bool) {
        let d = (to.0 - self.pos.0).hypot(to.1 - self.pos.1);
        if bus_rider && d >= BUS_MIN_TRIP_M && self.try_bus(to) {
            return;
        }
        let speed = if d < WALK_MAX_M { WALK_MPS } else { BIKE_MPS };
        self.move_to(to, speed);
    }

    fn try_bus(&mut self, to: (f64, f64)) -> bool {
        let from = self.pos;
        let best = self
            .lines
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.vehicles.is_empty())
            .map(|(i, l)| (i, l.distance_to(from) + l.distance_to(to)))
            .filter(|(i, _)| {
                let l = &self.lines[*i];
                l.distance_to(from) <= BUS_ACCESS_M && l.distance_to(to) <= BUS_ACCESS_M
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((li, _)) = best else {
            return false;
        };
        let line = &self.lines[li];
        let theta_a = from.1.atan2(from.0);
        let theta_b = to.1.atan2(to.0);
        let ccw = (theta_b - theta_a).rem_euclid(std::f64::consts::TAU);
        let dir = if ccw <= std::f64::consts::PI { 1.0 } else { -1.0 };
        if !line.vehicles.iter().any(|v| v.dir == dir) {
            return false;
        }
        let stop_a = line.point_at(theta_a);
        let stop_b = line.point_at(theta_b);
        self.move_to(stop_a, WALK_MPS);
        let (vehicle, wait_ms) = line.next_departure(theta_a, dir, self.t, self.epoch_ms);
        self.stay(None, stop_a, self.t + wait_ms);
        let sweep = if dir > 0.0 { ccw } else { std::f64::consts::TAU - ccw };
        let ride_ms = ((sweep / line.angular_speed()) * 1000.0).round().max(1.0) as u64;
        self.legs.push(Leg::Bus {
            line: li,
            vehicle,
            t0: self.t,
            t1: self.t + ride_ms,
        });
        self.t += ride_ms;
        self.pos = line.vehicle_position(vehicle, self.t, self.epoch_ms);
        self.move_to(to, WALK_MPS);
        let _ = stop_b;
        true
    }
}

fn spot_near(place: &Place, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let n = Normal::new(0.0, place.spot_sigma_m).expect("finite sigma");
    (place.x + n.sample(rng), place.y + n.sample(rng))
}

/// Truncated Pareto stay duration in hours.
fn extra_stay_h(rng: &mut ChaCha8Rng) -> f64 {
    const MIN_H: f64 = 1.0 / 3.0;
    const MAX_H: f64 = 4.0;
    const ALPHA: f64 = 1.2;
    let u: f64 = rng.random_range(1e-9..1.0);
    (MIN_H * u.powf(-1.0 / ALPHA)).min(MAX_H)
}

fn pick_weighted(anchors: &[(usize, f64)], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = anchors.iter().map(|a| a.1).sum();
    let mut r = rng.random_range(0.0..total);
    for &(p, w) in anchors {
        if r < w {
            return p;
        }
        r -= w;
    }
    anchors.last().expect("non-empty anchors").0
}

/// Builds a user's trajectory over `n_days` starting at `epoch_ms`, switching
/// to `after` from `change_day` on.
#[allow(clippy::too_many_arguments)]
pub fn simulate_routine(
    before: &Routine,
    after: Option<(&Routine, usize)>,
    n_days: usize,
    epoch_ms: u64,
    places: &[Place],
    lines: &[BusLine],
    rng: &mut ChaCha8Rng,
) -> Trajectory {
    let end = epoch_ms + n_days as u64 * DAY_MS;
    let mut b = Builder {
        legs: Vec::new(),
        pos: spot_near(&places[before.home], rng),
        t: epoch_ms,
        places,
        lines,
        epoch_ms,
    };
    let leave_jitter = Normal::new(0.0, 0.9).expect("finite");
    let mut home_spot = Some((before.home, b.pos));

    for day in 0..n_days {
        let r = match after {
            Some((a, change)) if day >= change => a,
            _ => before,
        };
        let day0 = epoch_ms + day as u64 * DAY_MS;
        let leave_h = (r.leave_home_h + leave_jitter.sample(rng)).clamp(5.5, 11.5);
        let leave = day0 + (leave_h * HOUR_MS) as u64;
        let spot = match home_spot.take() {
            Some((h, s)) if h == r.home => s,
            Some((h, s)) => {
                // the routine changed overnight: sleep at the old home, move at midnight
                b.stay(Some(h), s, day0);
                spot_near(&b.places[r.home], rng)
            }
            None => spot_near(&b.places[r.home], rng),
        };
        if b.pos != spot {
            b.travel(spot, r.bus_rider);
        }
        b.stay(Some(r.home), spot, leave);

        let mut plan: Vec<(usize, f64)> = Vec::new();
        let works = rng.random_bool(0.85);
        if works {
            let ln = LogNormal::new(r.day_stay_h.ln(), 0.3).expect("finite");
            plan.push((r.day_place, ln.sample(rng).clamp(2.0, 10.0)));
        }
        let roll: f64 = rng.random();
        let mut extras = if roll < 0.40 {
            0
        } else if roll < 0.75 {
            1
        } else {
            2
        };
        if !works {
            extras += 1;
        }
        if let Some(p) = r.outdoor {
            if rng.random_bool(OUTDOOR_DAY_P) {
                let ln = LogNormal::new(2.2f64.ln(), 0.4).expect("finite");
                plan.push((p, ln.sample(rng).clamp(0.5, 4.0)));
            }
        }
        for _ in 0..extras {
            if r.anchors.is_empty() {
                break;
            }
            plan.push((pick_weighted(&r.anchors, rng), extra_stay_h(rng)));
        }

        let latest = day0 + (23.0 * HOUR_MS) as u64;
        for (place, hours) in plan {
            if b.t >= latest {
                break;
            }
            let spot = spot_near(&b.places[place], rng);
            b.travel(spot, r.bus_rider);
            let until = (b.t + (hours * HOUR_MS) as u64).min(latest);
            b.stay(Some(place), spot, until);
        }
        let spot = spot_near(&b.places[r.home], rng);
        b.travel(spot, r.bus_rider);
        home_spot = Some((r.home, spot));
        if day + 1 == n_days {
            b.stay(Some(r.home), spot, end);
        }
    }
    // overlong final trips are cut at the horizon
    b.legs.retain(|l| l.t0() < end);
    if let Some(last) = b.legs.last_mut() {
        match last {
            Leg::Stay { t1, .. } | Leg::Move { t1, .. } | Leg::Bus { t1, .. } => *t1 = (*t1).max(end),
        }
    }
    Trajectory { legs: b.legs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_position() {
        let t = Trajectory::stationary(3.0, 4.0, 0, 100);
        assert_eq!(t.position_at(50, &[], 0), (3.0, 4.0));
        assert_eq!(t.position_at(500, &[], 0), (3.0, 4.0));
        assert_eq!(t.place_at(10), None);
    }

    #[test]
    fn linear_move() {
        let t = Trajectory {
            legs: vec![
                Leg::Stay { x: 0.0, y: 0.0, t0: 0, t1: 10, place: Some(0) },
                Leg::Move { from: (0.0, 0.0), to: (100.0, 0.0), t0: 10, t1: 20 },
                Leg::Stay { x: 100.0, y: 0.0, t0: 20, t1: 40, place: Some(1) },
            ],
        };
        assert_eq!(t.position_at(15, &[], 0), (50.0, 0.0));
        assert_eq!(t.place_at(5), Some(0));
        assert_eq!(t.place_at(25), Some(1));
        assert_eq!(t.place_time(0, 40), vec![(0, 10), (1, 20)]);
        let mut c = TrajectoryCursor::new(&t);
        assert_eq!(c.position_at(12, &[], 0), (20.0, 0.0));
        assert_eq!(c.position_at(30, &[], 0), (100.0, 0.0));
        assert_eq!(c.position_at(1, &[], 0), (0.0, 0.0));
    }
}
