//! JSON report documents. Field order is fixed by the struct definitions,
//! so identical inputs produce byte-identical reports (timestamp aside).

use serde::Serialize;

use decisive::abstraction::AbstractionDoc;
use decisive::analysis::{Diagnostics, ReachReport};
use decisive::finite::rational_to_f64;

#[derive(Serialize)]
pub struct ReportDoc {
    pub command: String,
    pub model_hash: String,
    pub timestamp: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<IntervalDoc>,
    pub diagnostics: DiagnosticsDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abstraction_export: Option<AbstractionDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub info: Option<InfoDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorDoc>,
}

#[derive(Serialize)]
pub struct IntervalDoc {
    pub lo: f64,
    pub hi: f64,
    pub eps: f64,
    pub converged: bool,
    pub steps_used: usize,
}

#[derive(Serialize, Default)]
pub struct DiagnosticsDoc {
    pub cycle_reset: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_cycle: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abstraction: Option<AbstractionStatsDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment_bound: Option<usize>,
}

#[derive(Serialize)]
pub struct AbstractionStatsDoc {
    pub blocks: usize,
    pub iterations: usize,
}

#[derive(Serialize)]
pub struct QuadratureDoc {
    pub terms: u64,
    pub budget_used: f64,
}

#[derive(Serialize)]
pub struct SimulationDoc {
    pub samples: usize,
    pub hits: usize,
    pub wilson: [f64; 2],
    pub seed: u64,
}

#[derive(Serialize)]
pub struct InfoDoc {
    pub variables: usize,
    pub locations: usize,
    pub edges: usize,
    pub strong_edges: usize,
    pub targets: Vec<String>,
    pub cycle_reset: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_cycle: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment_bound: Option<usize>,
    pub delay_classes: Vec<DelayClassDoc>,
}

#[derive(Serialize)]
pub struct DelayClassDoc {
    pub location: String,
    pub classes: Vec<String>,
}

#[derive(Serialize)]
pub struct ErrorDoc {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_cycle: Option<Vec<String>>,
}

impl ReportDoc {
    pub fn new(command: &str, model_hash: &str) -> Self {
        ReportDoc {
            command: command.to_string(),
            model_hash: model_hash.to_string(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            verdict: None,
            interval: None,
            diagnostics: DiagnosticsDoc::default(),
            abstraction_export: None,
            validation: None,
            info: None,
            error: None,
        }
    }

    pub fn fill_from_reach(&mut self, report: &ReachReport, eps: f64) {
        self.verdict = Some(report.verdict.as_str().to_string());
        if let Some(iv) = &report.prob_interval {
            self.interval = Some(IntervalDoc {
                lo: rational_to_f64(&iv.lo),
                hi: rational_to_f64(&iv.hi),
                eps,
                converged: iv.converged,
                steps_used: iv.steps_used,
            });
        }
        self.diagnostics = diag_doc(&report.diagnostics);
    }
}

pub fn diag_doc(d: &Diagnostics) -> DiagnosticsDoc {
    DiagnosticsDoc {
        cycle_reset: d.cycle_reset,
        witness_cycle: d.witness_cycle.clone(),
        abstraction: d.abstraction.as_ref().map(|a| AbstractionStatsDoc {
            blocks: a.blocks,
            iterations: a.iterations,
        }),
        quadrature: d.quadrature.as_ref().map(|q| QuadratureDoc {
            terms: q.terms,
            budget_used: q.budget_used,
        }),
        simulation: d.simulation.as_ref().map(|s| SimulationDoc {
            samples: s.samples,
            hits: s.hits,
            wilson: [s.wilson.0, s.wilson.1],
            seed: s.seed,
        }),
        segment_bound: d.segment_bound,
    }
}
