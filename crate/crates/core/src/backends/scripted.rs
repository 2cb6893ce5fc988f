use serde::{Deserialize, Serialize};

use super::{BackendError, Capabilities, PersuasionBackend, Reply};
use crate::debate::{DebateContext, Decision, Role, Transcript};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub discussant: u8,
    pub opponent: u8,
    pub decision: Decision,
}

/// A fixed decision rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedPolicy {
    AlwaysAccept,
    AlwaysReject,
    AlwaysIgnore,
    /// Decision looked up by `(discussant opinion, opponent opinion)`.
    Table(Vec<TableEntry>),
}

impl ScriptedPolicy {
    pub fn table(entries: impl IntoIterator<Item = ((u8, u8), Decision)>) -> Self {
        ScriptedPolicy::Table(
            entries
                .into_iter()
                .map(|((discussant, opponent), decision)| TableEntry {
                    discussant,
                    opponent,
                    decision,
                })
                .collect(),
        )
    }
}

/// Pure decision of a scripted policy; the transcript is ignored.
pub fn scripted_decide(
    policy: &ScriptedPolicy,
    ctx: &DebateContext,
    role: Role,
    _transcript: Transcript<'_>,
) -> Result<Decision, BackendError> {
    match policy {
        ScriptedPolicy::AlwaysAccept => Ok(Decision::Accept),
        ScriptedPolicy::AlwaysReject => Ok(Decision::Reject),
        ScriptedPolicy::AlwaysIgnore => Ok(Decision::Ignore),
        ScriptedPolicy::Table(entries) => {
            let (d, o) = (ctx.discussant_opinion.level(), ctx.opponent_opinion.level());
            entries
                .iter()
                .find(|e| e.discussant == d && e.opponent == o)
                .map(|e| e.decision)
                .ok_or(BackendError::TableMiss {
                    role,
                    discussant: d,
                    opponent: o,
                })
        }
    }
}

/// Separate scripted policies for the two roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedBackend {
    pub discussant: ScriptedPolicy,
    pub opponent: ScriptedPolicy,
}

impl ScriptedBackend {
    pub fn new(discussant: ScriptedPolicy, opponent: ScriptedPolicy) -> Self {
        ScriptedBackend { discussant, opponent }
    }

    /// Opponents always pass the turn; discussants follow `policy`.
    pub fn discussant_only(policy: ScriptedPolicy) -> Self {
        ScriptedBackend::new(policy, ScriptedPolicy::AlwaysReject)
    }
}

impl PersuasionBackend for ScriptedBackend {
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
        transcript: Transcript<'_>,
        _rng: &mut StreamRng,
    ) -> Result<Reply, BackendError> {
        let policy = match role {
            Role::Discussant => &self.discussant,
            Role::Opponent => &self.opponent,
        };
        scripted_decide(policy, ctx, role, transcript).map(Reply::bare)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::debate::run_debate;
    use crate::opinion::{Opinion, Statement};
    use crate::rng::stream;

    fn ctx(d: i64, o: i64) -> DebateContext {
        DebateContext::new(
            Statement::new("s").unwrap(),
            Opinion::new(d).unwrap(),
            Opinion::new(o).unwrap(),
        )
    }

    const EMPTY: Transcript<'static> = Transcript {
        opening: None,
        turns: &[],
    };

    #[test]
    fn constant_policies() {
        for role in [Role::Discussant, Role::Opponent] {
            assert_eq!(
                scripted_decide(&ScriptedPolicy::AlwaysIgnore, &ctx(1, 5), role, EMPTY),
                Ok(Decision::Ignore)
            );
        }
    }

    #[test]
    fn composition_with_debate_rules() {
        let b = ScriptedBackend::discussant_only(ScriptedPolicy::AlwaysAccept);
        assert_eq!(run_debate(&ctx(0, 6), &b, &mut stream(0, &[])).unwrap().delta, 1);

        let b = ScriptedBackend::discussant_only(ScriptedPolicy::table([((0, 6), Decision::Reject)]));
        assert_eq!(run_debate(&ctx(0, 6), &b, &mut stream(0, &[])).unwrap().delta, -1);
    }

    #[test]
    fn table_miss() {
        let p = ScriptedPolicy::table([((0, 6), Decision::Reject)]);
        assert_eq!(
            scripted_decide(&p, &ctx(6, 0), Role::Discussant, EMPTY),
            Err(BackendError::TableMiss {
                role: Role::Discussant,
                discussant: 6,
                opponent: 0
            })
        );
    }

    #[test]
    fn policies_deserialize_from_toml() {
        #[derive(Deserialize)]
        struct W {
            p: ScriptedPolicy,
        }
        let w: W = toml::from_str("p = \"always_accept\"").unwrap();
        assert_eq!(w.p, ScriptedPolicy::AlwaysAccept);
        let w: W = toml::from_str(
            "p = { table = [ { discussant = 0, opponent = 6, decision = \"REJECT\" } ] }",
        )
        .unwrap();
        assert_eq!(w.p, ScriptedPolicy::table([((0, 6), Decision::Reject)]));
    }
}
