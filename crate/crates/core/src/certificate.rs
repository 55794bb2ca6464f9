//! Run certificates: machine-readable records of a verification run.
//!
//! Certificates embed enough evidence to be re-checked after the fact: the
//! infeasibility combination with its equation rows, the degree tables of
//! the induced offset graph, the surviving hat selections. `recheck` walks
//! a loaded certificate and re-verifies that evidence with its own modular
//! arithmetic, deliberately not reusing the solver that produced it.

use crate::cioracle::OracleReport;
use crate::isomap::IsoReport;
use crate::polyring::Verdict;
use crate::refuter::{Conclusion, RefutationCertificate, StepEvidence};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RunCertificate {
    pub schema: u32,
    pub tool_version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
    pub timestamp: String,
    pub verdict: String,
    pub payload: Payload,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Lemmas { verdicts: Vec<Verdict> },
    Iso { reports: Vec<IsoReport> },
    Refutation { certificate: RefutationCertificate },
    Oracle { report: OracleReport },
}

impl RunCertificate {
    pub fn new(
        command: impl Into<String>,
        family: Option<String>,
        p: Option<u64>,
        timestamp: impl Into<String>,
        payload: Payload,
    ) -> Self {
        let verdict = match &payload {
            Payload::Lemmas { verdicts } => {
                if verdicts.iter().all(|v| v.pass) {
                    "pass"
                } else {
                    "fail"
                }
            }
            Payload::Iso { reports } => {
                if reports.iter().all(|r| r.pass) {
                    "pass"
                } else {
                    "fail"
                }
            }
            Payload::Refutation { certificate } => match certificate.conclusion {
                Conclusion::Refuted => "refuted",
                Conclusion::Inconclusive => "inconclusive",
                Conclusion::Failed => "failed",
            },
            Payload::Oracle { report } => {
                if report.pass {
                    "pass"
                } else {
                    "fail"
                }
            }
        };
        RunCertificate {
            schema: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            family,
            p,
            timestamp: timestamp.into(),
            verdict: verdict.to_string(),
            payload,
        }
    }

    /// Exit code the CLI reports for this certificate.
    pub fn exit_code(&self) -> i32 {
        match self.verdict.as_str() {
            "pass" | "refuted" => 0,
            "inconclusive" => 2,
            _ => 1,
        }
    }
}

/// Re-verifies the embedded evidence of a loaded certificate.
pub fn recheck(cert: &RunCertificate) -> Result<(), String> {
    if cert.schema != SCHEMA_VERSION {
        return Err(format!("unsupported schema {}", cert.schema));
    }
    match &cert.payload {
        Payload::Lemmas { verdicts } => {
            let all = verdicts.iter().all(|v| v.pass);
            expect(
                (cert.verdict == "pass") == all,
                "verdict disagrees with the lemma outcomes",
            )
        }
        Payload::Iso { reports } => {
            for r in reports {
                expect(
                    r.pass == r.classes.iter().all(|c| c.pass),
                    "report pass flag disagrees with its classes",
                )?;
            }
            let all = reports.iter().all(|r| r.pass);
            expect(
                (cert.verdict == "pass") == all,
                "verdict disagrees with the iso reports",
            )
        }
        Payload::Refutation { certificate } => recheck_refutation(certificate),
        Payload::Oracle { report } => {
            expect(
                report.pass == report.counterexamples.is_empty(),
                "oracle pass flag disagrees with its counterexample list",
            )?;
            expect(
                (cert.verdict == "pass") == report.pass,
                "verdict disagrees with the oracle report",
            )
        }
    }
}

fn recheck_refutation(cert: &RefutationCertificate) -> Result<(), String> {
    let p = cert.p;
    let refuted = cert.conclusion == Conclusion::Refuted;
    let all_pass = cert.steps.iter().all(|s| s.pass);
    expect(
        refuted == all_pass,
        "conclusion disagrees with the step verdicts",
    )?;
    for step in &cert.steps {
        recheck_evidence(&step.evidence, p)?;
    }
    for sub in &cert.sub_certificates {
        recheck_refutation(sub)?;
    }
    Ok(())
}

fn recheck_evidence(ev: &StepEvidence, p: u64) -> Result<(), String> {
    match ev {
        StepEvidence::Infeasibility {
            equations,
            lambda,
            lambda_dot_b,
            aggregate_combination,
            ..
        } => {
            if let Some(lambda) = lambda {
                expect(lambda.len() == equations.len(), "lambda length mismatch")?;
                let cols = equations.first().map_or(0, |e| e.row.len());
                for j in 0..cols {
                    let mut acc = 0u64;
                    for (l, eq) in lambda.iter().zip(equations) {
                        acc = (acc + l * eq.row[j]) % p;
                    }
                    expect(acc == 0, "lambda does not annihilate the rows")?;
                }
                let mut ldotb = 0u64;
                for (l, eq) in lambda.iter().zip(equations) {
                    ldotb = (ldotb + l * eq.rhs) % p;
                }
                expect(ldotb != 0, "lambda^T b vanishes")?;
                if let Some(recorded) = lambda_dot_b {
                    expect(ldotb == *recorded, "recorded lambda^T b is wrong")?;
                }
            }
            if let Some(ones) = aggregate_combination {
                expect(
                    ones.iter().all(|&x| x == 1),
                    "the recorded aggregate combination is not all-ones",
                )?;
                let cols = equations.first().map_or(0, |e| e.row.len());
                for j in 0..cols {
                    let mut acc = 0u64;
                    for eq in equations {
                        acc = (acc + eq.row[j]) % p;
                    }
                    expect(acc == 0, "the all-ones combination does not annihilate the rows")?;
                }
                let mut sum_rhs = 0u64;
                for eq in equations {
                    sum_rhs = (sum_rhs + eq.rhs) % p;
                }
                expect(sum_rhs != 0, "the all-ones combination has zero right side")?;
            }
            Ok(())
        }
        StepEvidence::Hat {
            sum_element,
            pairs,
            selections,
            survivors,
            ..
        } => {
            if !pairs.is_empty() {
                expect(
                    *selections == 1u64 << pairs.len(),
                    "selection count is not 2^pairs",
                )?;
            }
            if let Some(e) = sum_element {
                for survivor in survivors {
                    let mut total = vec![0u64; e.len()];
                    for choice in survivor {
                        for (t, c) in total.iter_mut().zip(choice) {
                            *t = (*t + c) % p;
                        }
                    }
                    expect(total == *e, "a recorded survivor does not sum to the sum element")?;
                }
            }
            Ok(())
        }
        StepEvidence::DegreeProfile {
            vertices,
            offsets,
            degrees,
            profile,
            ..
        } => {
            expect(offsets.len() == *vertices, "offset list length mismatch")?;
            expect(degrees.len() == *vertices, "degree table length mismatch")?;
            let set: std::collections::BTreeSet<&Vec<u64>> = offsets.iter().collect();
            for (x, &recorded) in offsets.iter().zip(degrees) {
                let mut d = 0usize;
                for y in offsets {
                    if y == x {
                        continue;
                    }
                    let diff: Vec<u64> = x
                        .iter()
                        .zip(y)
                        .map(|(&a, &b)| (a + p - b) % p)
                        .collect();
                    if set.contains(&diff) {
                        d += 1;
                    }
                }
                expect(d == recorded, "a recorded degree is wrong")?;
            }
            let mut recount: std::collections::BTreeMap<usize, usize> = Default::default();
            for &d in degrees {
                *recount.entry(d).or_default() += 1;
            }
            let recount: Vec<(usize, usize)> = recount.into_iter().collect();
            expect(&recount == profile, "the degree profile does not match its table")
        }
        StepEvidence::Both { s_side, t_side } => {
            recheck_evidence(s_side, p)?;
            recheck_evidence(t_side, p)
        }
        _ => Ok(()),
    }
}

fn expect(cond: bool, msg: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{build_family, Family};
    use crate::refuter::refute_directed;

    fn refutation_cert() -> RunCertificate {
        let (s, t, _) = build_family(Family::Rank2p3, 3).unwrap();
        RunCertificate::new(
            "refute --family rank2p3 --p 3 --mode directed",
            Some("rank2p3".into()),
            Some(3),
            "2000-01-01T00:00:00Z",
            Payload::Refutation {
                certificate: refute_directed(&s, &t),
            },
        )
    }

    #[test]
    fn refutation_certificate_round_trips_and_rechecks() {
        let cert = refutation_cert();
        assert_eq!(cert.verdict, "refuted");
        assert_eq!(cert.exit_code(), 0);
        let json = serde_json::to_string_pretty(&cert).unwrap();
        let loaded: RunCertificate = serde_json::from_str(&json).unwrap();
        assert_eq!(loaded, cert);
        recheck(&loaded).unwrap();
    }

    #[test]
    fn tampered_lambda_fails_recheck()
    {
        let mut cert = refutation_cert();
        if let Payload::Refutation { certificate } = &mut cert.payload {
            for step in &mut certificate.steps {
                if let StepEvidence::Infeasibility { lambda: Some(l), .. } = &mut step.evidence {
                    l[0] = 2; // forge the combination
                }
            }
        }
        assert!(recheck(&cert).is_err());
    }

    #[test]
    fn tampered_degree_table_fails_recheck() {
        let (s, t, _) = build_family(Family::Rank2p3, 5).unwrap();
        let sbar = crate::families::undirected_closure(&s).unwrap();
        let tbar = crate::families::undirected_closure(&t).unwrap();
        let refutation = crate::refuter::refute_undirected(&sbar, &tbar, &s, &t).unwrap();
        let mut cert = RunCertificate::new(
            "refute --family rank2p3 --p 5 --mode undirected",
            Some("rank2p3".into()),
            Some(5),
            "2000-01-01T00:00:00Z",
            Payload::Refutation {
                certificate: refutation,
            },
        );
        recheck(&cert).unwrap();
        if let Payload::Refutation { certificate } = &mut cert.payload {
            for step in &mut certificate.steps {
                if let StepEvidence::DegreeProfile { degrees, .. } = &mut step.evidence {
                    degrees[0] += 1;
                }
            }
        }
        assert!(recheck(&cert).is_err());
    }
}
