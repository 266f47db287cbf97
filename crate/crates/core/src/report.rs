//! Text and machine-readable rendering of verdicts and campaign results.
//!
//! The machine format is line-oriented and stable: `VERDICT
//! clause=<canonical clause> result=<correct|refuted>` followed by an
//! indented counterexample dump (fault trace, then one line per table
//! entry). Output never depends on worker count.

use std::fmt::Write;

use crate::checker::{CftReport, Counterexample, Verdict};
use crate::harness::{CampaignReport, TheoremReport, TheoremStatus, TransferReport, TrialStatus};

pub fn verdict_word(v: &Verdict) -> &'static str {
    match v {
        Verdict::CorrectWithinBounds => "correct",
        Verdict::Refuted(_) => "refuted",
    }
}

fn push_cex(out: &mut String, cex: &Counterexample, indent: &str) {
    let _ = writeln!(out, "{indent}trace_f {}", cex.trace_f);
    for (trace, offers) in cex.env_f.entries() {
        let items: Vec<String> = offers.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "{indent}env_f {} {{{}}}", trace, items.join(","));
    }
    for (trace, offers) in cex.env_c.entries() {
        let items: Vec<String> = offers.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "{indent}env_c {} {{{}}}", trace, items.join(","));
    }
    for (witness, divergence) in &cex.failed_witnesses {
        let _ = writeln!(out, "{indent}failed_witness {witness} {divergence}");
    }
}

pub fn cft_report_machine(report: &CftReport) -> String {
    let mut out = String::new();
    for (clause, verdict) in &report.clauses {
        let _ = writeln!(out, "VERDICT clause={clause} result={}", verdict_word(verdict));
        if let Verdict::Refuted(cex) = verdict {
            push_cex(&mut out, cex, "    ");
        }
    }
    out
}

pub fn cft_report_text(report: &CftReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "output event {}", report.output_event);
    for (clause, verdict) in &report.clauses {
        match verdict {
            Verdict::CorrectWithinBounds => {
                let _ = writeln!(out, "  clause {clause}: correct within bounds");
            }
            Verdict::Refuted(cex) => {
                let _ = writeln!(out, "  clause {clause}: REFUTED");
                let _ = writeln!(out, "    fault trace: {}", cex.trace_f);
                let _ = writeln!(out, "    faulty-side offers:");
                for (trace, offers) in cex.env_f.entries() {
                    let items: Vec<String> = offers.iter().map(ToString::to_string).collect();
                    let _ = writeln!(out, "      {} -> {{{}}}", trace, items.join(","));
                }
                let _ = writeln!(out, "    correct-side offers:");
                for (trace, offers) in cex.env_c.entries() {
                    let items: Vec<String> = offers.iter().map(ToString::to_string).collect();
                    let _ = writeln!(out, "      {} -> {{{}}}", trace, items.join(","));
                }
                if !cex.failed_witnesses.is_empty() {
                    let _ = writeln!(out, "    maximal correct-side runs:");
                    for (witness, divergence) in &cex.failed_witnesses {
                        let _ =
                            writeln!(out, "      {witness} (diverged at index {divergence})");
                    }
                }
            }
        }
    }
    out
}

pub fn status_word(status: &TheoremStatus) -> &'static str {
    match status {
        TheoremStatus::Validated => "validated",
        TheoremStatus::PremisesFailed => "premises_failed",
        TheoremStatus::Violation => "violation",
    }
}

pub fn theorem_report_machine(report: &TheoremReport) -> String {
    let mut out = String::new();
    for (clause, verdict) in &report.premise_c.clauses {
        let _ = writeln!(
            out,
            "PREMISE side=c output={} clause={clause} result={}",
            report.premise_c.output_event,
            verdict_word(verdict)
        );
        if let Verdict::Refuted(cex) = verdict {
            push_cex(&mut out, cex, "    ");
        }
    }
    for (event, premise) in &report.premises_d {
        for (clause, verdict) in &premise.clauses {
            let _ = writeln!(
                out,
                "PREMISE side=d output={event} clause={clause} result={}",
                verdict_word(verdict)
            );
            if let Verdict::Refuted(cex) = verdict {
                push_cex(&mut out, cex, "    ");
            }
        }
    }
    for (kind, conclusion) in [
        ("composed", report.conclusion.as_ref()),
        ("strict", report.strict_conclusion.as_ref()),
    ] {
        if let Some(conclusion) = conclusion {
            for (clause, verdict) in &conclusion.clauses {
                let _ = writeln!(
                    out,
                    "CONCLUSION kind={kind} clause={clause} result={}",
                    verdict_word(verdict)
                );
                if let Verdict::Refuted(cex) = verdict {
                    push_cex(&mut out, cex, "    ");
                }
            }
        }
    }
    let _ = writeln!(out, "STATUS {}", status_word(&report.status));
    out
}

pub fn theorem_report_text(report: &TheoremReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "premises on c:");
    out.push_str(&indent(&cft_report_text(&report.premise_c), "  "));
    for (event, premise) in &report.premises_d {
        let _ = writeln!(out, "premises on d (bound event {event}):");
        out.push_str(&indent(&cft_report_text(premise), "  "));
    }
    match (&report.conclusion, &report.strict_conclusion) {
        (Some(conclusion), Some(strict)) => {
            let _ = writeln!(out, "conclusion (composed tree vs composite):");
            out.push_str(&indent(&cft_report_text(conclusion), "  "));
            let _ = writeln!(out, "conclusion (strictly composed tree vs composite):");
            out.push_str(&indent(&cft_report_text(strict), "  "));
        }
        _ => {
            let _ = writeln!(out, "conclusion not judged (premises failed)");
        }
    }
    let _ = writeln!(out, "status: {}", status_word(&report.status));
    out
}

pub fn transfer_machine(report: &TransferReport) -> String {
    let mut out = String::new();
    for case in &report.cases {
        match &case.transferred_to {
            Some(strict_clause) => {
                let _ = writeln!(
                    out,
                    "TRANSFER clause={} transferred=yes strict_clause={strict_clause}",
                    case.clause
                );
            }
            None => {
                let _ = writeln!(out, "TRANSFER clause={} transferred=no", case.clause);
            }
        }
    }
    out
}

pub fn trial_status_word(status: &TrialStatus) -> &'static str {
    match status {
        TrialStatus::Validated => "validated",
        TrialStatus::PremisesFailed => "premises_failed",
        TrialStatus::Violation => "violation",
        TrialStatus::CompositeNondeterministic(_) => "composite_nondeterministic",
    }
}

pub fn campaign_machine(report: &CampaignReport) -> String {
    let mut out = String::new();
    for trial in &report.trials {
        let transfer_cases = trial.transfer.as_ref().map_or(0, |t| t.cases.len());
        let transfer_ok = trial.transfer.as_ref().is_none_or(TransferReport::holds);
        let _ = writeln!(
            out,
            "TRIAL seed={} status={} transfer_cases={} transfer_ok={}",
            trial.seed,
            trial_status_word(&trial.status),
            transfer_cases,
            transfer_ok
        );
        if let TrialStatus::Violation = trial.status {
            if let Some(report) = &trial.report {
                out.push_str(&indent(&theorem_report_machine(report), "    "));
            }
        }
        if let Some(transfer) = &trial.transfer {
            out.push_str(&transfer_machine(transfer));
        }
    }
    let _ = writeln!(
        out,
        "CAMPAIGN trials={} validated={} premises_failed={} violations={} nondet={} strict_refutations={} transfer_ok={}",
        report.trials.len(),
        report.count(|s| matches!(s, TrialStatus::Validated)),
        report.count(|s| matches!(s, TrialStatus::PremisesFailed)),
        report.violations(),
        report.count(|s| matches!(s, TrialStatus::CompositeNondeterministic(_))),
        report.strict_refutations(),
        report.transfer_holds()
    );
    out
}

pub fn campaign_text(report: &CampaignReport) -> String {
    let mut out = String::new();
    for trial in &report.trials {
        let _ = writeln!(
            out,
            "seed {:>4}: {}",
            trial.seed,
            trial_status_word(&trial.status)
        );
        if let TrialStatus::Violation = trial.status {
            if let Some(r) = &trial.report {
                out.push_str(&indent(&theorem_report_text(r), "    "));
            }
        }
    }
    let _ = writeln!(
        out,
        "{} trials: {} validated, {} premises failed, {} violations, {} non-deterministic composites; strict-clause refutations: {}; transfer property: {}",
        report.trials.len(),
        report.count(|s| matches!(s, TrialStatus::Validated)),
        report.count(|s| matches!(s, TrialStatus::PremisesFailed)),
        report.violations(),
        report.count(|s| matches!(s, TrialStatus::CompositeNondeterministic(_))),
        report.strict_refutations(),
        if report.transfer_holds() { "holds" } else { "VIOLATED" }
    );
    out
}

fn indent(text: &str, prefix: &str) -> String {
    let mut out = String::new();
    for line in text.lines() {
        let _ = writeln!(out, "{prefix}{line}");
    }
    out
}
