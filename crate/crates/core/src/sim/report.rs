use serde::{Deserialize, Serialize};

use super::MAX_FAIL_RATE;

/// Aggregate of one (scenario, model, π) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloCell {
    pub scenario: String,
    pub model: String,
    /// None when assignment depends on X.
    pub pi: Option<f64>,
    pub n: usize,
    pub reps: usize,
    /// mean(estimate) − β_ATE
    pub bias: f64,
    pub sd: f64,
    /// sd / √(successful reps)
    pub mc_se: f64,
    pub fail_rate: f64,
    #[serde(skip)]
    pub mean_se: f64,
    #[serde(skip)]
    pub mean_estimate: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl MonteCarloCell {
    pub(super) fn aggregate(
        scenario: &str,
        model: &str,
        pi: Option<f64>,
        n: usize,
        seed: u64,
        outcomes: &[Option<(f64, f64)>],
        beta_ate: f64,
    ) -> Self {
        let reps = outcomes.len();
        let ok: Vec<(f64, f64)> = outcomes.iter().flatten().copied().collect();
        let fail_rate = (reps - ok.len()) as f64 / reps as f64;
        let (mean, sd, mean_se) = if fail_rate > MAX_FAIL_RATE || ok.len() < 2 {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let k = ok.len() as f64;
            let mean = ok.iter().map(|o| o.0).sum::<f64>() / k;
            let var = ok.iter().map(|o| (o.0 - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (mean, var.sqrt(), ok.iter().map(|o| o.1).sum::<f64>() / k)
        };
        MonteCarloCell {
            scenario: scenario.to_string(),
            model: model.to_string(),
            pi,
            n,
            reps,
            bias: mean - beta_ate,
            sd,
            mc_se: sd / (ok.len() as f64).sqrt(),
            fail_rate,
            mean_se,
            mean_estimate: mean,
            seed,
        }
    }

    /// Approximate standard error of the sample SD, sd / √(2(reps − 1)).
    pub fn sd_se(&self) -> f64 {
        self.sd / (2.0 * (self.reps as f64 - 1.0)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub seed: u64,
    pub cells: Vec<MonteCarloCell>,
}

pub const CSV_HEADER: &str = "scenario,model,pi,n,reps,bias,sd,mc_se,fail_rate";

impl MonteCarloReport {
    pub fn cell(&self, scenario: &str, model: &str, pi: Option<f64>) -> Option<&MonteCarloCell> {
        self.cells.iter().find(|c| c.scenario == scenario && c.model == model && c.pi == pi)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.cells {
            w.serialize(c).expect("in-memory CSV write");
        }
        if self.cells.is_empty() {
            return format!("{CSV_HEADER}\n");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
    }

    /// JSON array of cells with the CSV fields; NaN becomes null.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.cells).expect("report serialises")
    }
}
