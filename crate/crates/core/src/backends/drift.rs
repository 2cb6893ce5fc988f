use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BackendError, Capabilities, PersuasionBackend, Reply};
use crate::analysis::{classify_histogram, NeighborhoodConfig};
use crate::debate::{DebateContext, Decision, Role, Transcript};
use crate::rng::StreamRng;

/// Factors applied to the discussant's acceptance probability when it can
/// see its neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborhoodMultipliers {
    pub aligned: f64,
    pub misaligned: f64,
    pub mixed: f64,
}

impl Default for NeighborhoodMultipliers {
    fn default() -> Self {
        NeighborhoodMultipliers {
            aligned: 1.0,
            misaligned: 1.0,
            mixed: 1.0,
        }
    }
}

impl NeighborhoodMultipliers {
    pub fn get(&self, config: NeighborhoodConfig) -> f64 {
        match config {
            NeighborhoodConfig::Aligned => self.aligned,
            NeighborhoodConfig::Misaligned => self.misaligned,
            NeighborhoodConfig::Mixed => self.mixed,
        }
    }
}

/// Decision probabilities of the agreement-drift policy.
///
/// "Up" rates apply when the opponent holds the higher opinion, "down" rates
/// when it holds the lower one. Residual mass is `IGNORE`. The opponent
/// accepts with `opponent_accept_p`, ignores with `opponent_ignore_p` and
/// otherwise rejects, which hands the turn to the discussant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftParams {
    pub p_accept_up: f64,
    pub p_accept_down: f64,
    pub p_reject_up: f64,
    pub p_reject_down: f64,
    pub neighborhood_multipliers: NeighborhoodMultipliers,
    pub opponent_accept_p: f64,
    pub opponent_ignore_p: f64,
}

impl Default for DriftParams {
    fn default() -> Self {
        DriftParams {
            p_accept_up: 0.9,
            p_accept_down: 0.55,
            p_reject_up: 0.0,
            p_reject_down: 0.0,
            neighborhood_multipliers: NeighborhoodMultipliers::default(),
            opponent_accept_p: 0.4,
            opponent_ignore_p: 0.0,
        }
    }
}

impl DriftParams {
    /// Opponent always passes the turn; only the discussant decides.
    pub fn pass_through(mut self) -> Self {
        self.opponent_accept_p = 0.0;
        self.opponent_ignore_p = 0.0;
        self
    }

    /// Every violated constraint, as messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let probs = [
            ("p_accept_up", self.p_accept_up),
            ("p_accept_down", self.p_accept_down),
            ("p_reject_up", self.p_reject_up),
            ("p_reject_down", self.p_reject_down),
            ("opponent_accept_p", self.opponent_accept_p),
            ("opponent_ignore_p", self.opponent_ignore_p),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                out.push(format!("{name} = {p} is not a probability"));
            }
        }
        for (name, a, r) in [
            ("up", self.p_accept_up, self.p_reject_up),
            ("down", self.p_accept_down, self.p_reject_down),
        ] {
            if a + r > 1.0 + 1e-12 {
                out.push(format!("accept + reject probabilities ({name}) exceed 1"));
            }
        }
        if self.opponent_accept_p + self.opponent_ignore_p > 1.0 + 1e-12 {
            out.push("opponent_accept_p + opponent_ignore_p exceeds 1".into());
        }
        let m = self.neighborhood_multipliers;
        for (name, f) in [("aligned", m.aligned), ("misaligned", m.misaligned), ("mixed", m.mixed)] {
            if !(f.is_finite() && f >= 0.0) {
                out.push(format!("neighborhood multiplier {name} = {f} must be finite and non-negative"));
            }
        }
        out
    }

    /// `[accept, reject, ignore]` for the given role and context.
    pub fn distribution(&self, ctx: &DebateContext, role: Role) -> [f64; 3] {
        match role {
            Role::Opponent => {
                let accept = self.opponent_accept_p;
                let ignore = self.opponent_ignore_p.min(1.0 - accept);
                [accept, 1.0 - accept - ignore, ignore]
            }
            Role::Discussant => {
                let (d, o) = (ctx.discussant_opinion, ctx.opponent_opinion);
                let (accept, reject) = match o.cmp(&d) {
                    std::cmp::Ordering::Greater => (self.p_accept_up, self.p_reject_up),
                    std::cmp::Ordering::Less => (self.p_accept_down, self.p_reject_down),
                    std::cmp::Ordering::Equal => (0.0, 0.0),
                };
                let factor = ctx
                    .neighborhood
                    .as_ref()
                    .and_then(|h| classify_histogram(d, o, h))
                    .map_or(1.0, |c| self.neighborhood_multipliers.get(c));
                let accept = (accept * factor).clamp(0.0, 1.0);
                let reject = reject.clamp(0.0, 1.0 - accept);
                [accept, reject, 1.0 - accept - reject]
            }
        }
    }
}

/// Samples one decision, consuming exactly one draw from `rng`.
pub fn drift_decide(params: &DriftParams, ctx: &DebateContext, role: Role, rng: &mut StreamRng) -> Decision {
    let u: f64 = rng.random();
    let [accept, reject, _] = params.distribution(ctx, role);
    if u < accept {
        Decision::Accept
    } else if u < accept + reject {
        Decision::Reject
    } else {
        Decision::Ignore
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftBackend {
    pub params: DriftParams,
}

impl DriftBackend {
    pub fn new(params: DriftParams) -> Result<Self, BackendError> {
        let v = params.violations();
        if v.is_empty() {
            Ok(DriftBackend { params })
        } else {
            Err(BackendError::Config(v.join("; ")))
        }
    }
}

impl PersuasionBackend for DriftBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            deterministic: true,
            concurrent_safe: true,
            max_in_flight: None,
        }
    }

    fn decide(
        &self,
        ctx: &DebateContext,
        role: Role,
        _transcript: Transcript<'_>,
        rng: &mut StreamRng,
    ) -> Result<Reply, BackendError> {
        Ok(Reply::bare(drift_decide(&self.params, ctx, role, rng)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opinion::{Histogram, Opinion, Statement};
    use crate::rng::stream;
    use rand::RngCore;

    fn ctx(d: i64, o: i64) -> DebateContext {
        DebateContext::new(
            Statement::new("s").unwrap(),
            Opinion::new(d).unwrap(),
            Opinion::new(o).unwrap(),
        )
    }

    fn zero() -> DriftParams {
        DriftParams {
            p_accept_up: 0.0,
            p_accept_down: 0.0,
            p_reject_up: 0.0,
            p_reject_down: 0.0,
            neighborhood_multipliers: NeighborhoodMultipliers::default(),
            opponent_accept_p: 0.0,
            opponent_ignore_p: 0.0,
        }
    }

    #[test]
    fn degenerate_accept() {
        let p = DriftParams {
            p_accept_up: 1.0,
            ..zero()
        };
        let mut rng = stream(5, &[]);
        for _ in 0..1000 {
            assert_eq!(drift_decide(&p, &ctx(1, 4), Role::Discussant, &mut rng), Decision::Accept);
        }
        // pass-through opponent
        assert_eq!(drift_decide(&p, &ctx(1, 4), Role::Opponent, &mut rng), Decision::Reject);
    }

    #[test]
    fn one_draw_per_call() {
        let p = DriftParams::default();
        let mut a = stream(9, &[]);
        let mut b = stream(9, &[]);
        drift_decide(&p, &ctx(1, 4), Role::Discussant, &mut a);
        drift_decide(&p, &ctx(3, 3), Role::Opponent, &mut a);
        b.next_u64();
        b.next_u64();
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn empirical_rates_converge() {
        let p = DriftParams {
            p_accept_up: 0.83,
            p_reject_up: 0.1,
            p_accept_down: 0.2,
            p_reject_down: 0.3,
            ..DriftParams::default()
        };
        let n = 10_000;
        for (c, want) in [(ctx(1, 5), [0.83, 0.1, 0.07]), (ctx(5, 1), [0.2, 0.3, 0.5])] {
            let mut rng = stream(17, &[]);
            let mut counts = [0usize; 3];
            for _ in 0..n {
                let d = drift_decide(&p, &c, Role::Discussant, &mut rng);
                counts[Decision::ALL.iter().position(|&x| x == d).unwrap()] += 1;
            }
            for (k, w) in counts.iter().zip(want) {
                assert!((*k as f64 / n as f64 - w).abs() < 0.02, "{counts:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn zero_misaligned_multiplier_blocks_acceptance() {
        let p = DriftParams {
            p_accept_up: 0.9,
            neighborhood_multipliers: NeighborhoodMultipliers {
                misaligned: 0.0,
                ..NeighborhoodMultipliers::default()
            },
            ..zero()
        };
        // all neighbors sit with the discussant at 0
        let hood = Histogram::from_opinions([Opinion::MIN; 4]);
        let c = ctx(0, 6).with_neighborhood(Some(hood));
        assert_eq!(p.distribution(&c, Role::Discussant)[0], 0.0);
        let mut rng = stream(1, &[]);
        for _ in 0..500 {
            assert_ne!(drift_decide(&p, &c, Role::Discussant, &mut rng), Decision::Accept);
        }
        // without awareness the multiplier is not applied
        assert_eq!(p.distribution(&ctx(0, 6), Role::Discussant)[0], 0.9);
    }

    #[test]
    fn distribution_sums_to_one_after_clamping() {
        let p = DriftParams {
            p_accept_up: 0.7,
            p_reject_up: 0.3,
            neighborhood_multipliers: NeighborhoodMultipliers {
                aligned: 2.0,
                ..NeighborhoodMultipliers::default()
            },
            ..zero()
        };
        let hood = Histogram::from_opinions([Opinion::MAX; 3]);
        let d = p.distribution(&ctx(0, 6).with_neighborhood(Some(hood)), Role::Discussant);
        assert_eq!(d, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = DriftParams {
            p_accept_up: 1.2,
            opponent_accept_p: 0.7,
            opponent_ignore_p: 0.7,
            ..DriftParams::default()
        };
        assert_eq!(p.violations().len(), 3);
        assert!(DriftBackend::new(p).is_err());
    }
}
