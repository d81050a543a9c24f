//! Closed-form mean response time approximations under a fixed capacity
//! budget `n * mu = lambda * E[Y] / rho0`.
//!
//! All three policies share the two-moment waiting-time factor of
//! [`marchal_phi`]. RR sees per-server arrivals with squared COV `c_a^2/n`,
//! LWL is treated as a central-queue G/G/n system, and JIQ blends the two
//! with the Erlang-B probability that every server is busy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Policy {
    #[serde(alias = "rr")]
    RR,
    #[serde(alias = "jiq")]
    JIQ,
    #[serde(alias = "lwl")]
    LWL,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::RR, Policy::JIQ, Policy::LWL];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::RR => "RR",
            Policy::JIQ => "JIQ",
            Policy::LWL => "LWL",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RR" => Ok(Policy::RR),
            "JIQ" => Ok(Policy::JIQ),
            "LWL" => Ok(Policy::LWL),
            _ => Err(format!("unknown policy {s:?} (expected RR, JIQ or LWL)")),
        }
    }
}

/// Which form of the waiting-time scaling factor to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiVariant {
    /// `(1 + cx2)(ca2 + rho^2 cx2) / (2 (1 + rho^2 cx2))`.
    #[default]
    Canonical,
    /// Numerator and denominator sharing `(ca2 + rho^2 cx2)`, which cancels
    /// to `(1 + cx2) / 2`; kept for comparison only.
    AsWritten,
}

impl PhiVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PhiVariant::Canonical => "canonical",
            PhiVariant::AsWritten => "as_written",
        }
    }
}

impl fmt::Display for PhiVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Workload moments plus cluster sizing inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub lambda: f64,
    pub c_a: f64,
    pub mean_y: f64,
    pub c_y: f64,
    pub rho0: f64,
    pub n: u32,
}

impl ClusterParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rho0 > 0.0 && self.rho0 < 1.0) {
            return Err(format!("rho0 must lie in (0, 1), got {}", self.rho0));
        }
        if self.n < 1 {
            return Err("n must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) || !(self.mean_y > 0.0 && self.mean_y.is_finite()) {
            return Err(format!("lambda and mean_y must be positive, got {} and {}", self.lambda, self.mean_y));
        }
        if !(self.c_a >= 0.0 && self.c_y >= 0.0) {
            return Err("coefficients of variation must be non-negative".into());
        }
        Ok(())
    }

    pub fn with_n(self, n: u32) -> ClusterParams {
        ClusterParams { n, ..self }
    }

    /// Mean job service time at the budget-constrained speed, `n rho0 / lambda`.
    pub fn mean_service(&self) -> f64 {
        self.n as f64 * self.rho0 / self.lambda
    }

    /// Offered traffic `A = lambda E[X] = n rho0`.
    pub fn offered_load(&self) -> f64 {
        self.n as f64 * self.rho0
    }
}

/// Per-server rate `mu = lambda E[Y] / (n rho0)`.
pub fn server_rate(params: &ClusterParams) -> f64 {
    params.lambda * params.mean_y / (params.n as f64 * params.rho0)
}

/// Erlang-B blocking probability by the forward recursion
/// `B(m) = A B(m-1) / (m + A B(m-1))`, `B(0) = 1`.
pub fn erlang_b(m: u32, a: f64) -> f64 {
    let mut b = 1.0;
    for k in 1..=m {
        let ab = a * b;
        b = ab / (k as f64 + ab);
    }
    b
}

/// Erlang-C probability of waiting. Requires `0 <= a < m`.
pub fn erlang_c(m: u32, a: f64) -> Result<f64, String> {
    if m == 0 || !(a >= 0.0) || a >= m as f64 {
        return Err(format!("Erlang-C needs 0 <= A < m, got m={m}, A={a}"));
    }
    let b = erlang_b(m, a);
    let r = a / m as f64;
    Ok(b / (1.0 - r + r * b))
}

/// Waiting-time scaling factor for squared arrival COV `c_a2`, squared
/// service COV `c_x2` and utilization `rho`.
pub fn marchal_phi(c_a2: f64, c_x2: f64, rho: f64, variant: PhiVariant) -> f64 {
    match variant {
        PhiVariant::Canonical => {
            let r2c = rho * rho * c_x2;
            (1.0 + c_x2) * (c_a2 + r2c) / (2.0 * (1.0 + r2c))
        }
        PhiVariant::AsWritten => (1.0 + c_x2) / 2.0,
    }
}

pub fn mean_resp_rr(params: &ClusterParams, variant: PhiVariant) -> f64 {
    let n = params.n as f64;
    let rho = params.rho0;
    let phi = marchal_phi(params.c_a * params.c_a / n, params.c_y * params.c_y, rho, variant);
    params.mean_service() * (1.0 + rho / (1.0 - rho) * phi)
}

pub fn mean_resp_lwl(params: &ClusterParams, variant: PhiVariant) -> f64 {
    let n = params.n as f64;
    let rho = params.rho0;
    let phi = marchal_phi(params.c_a * params.c_a, params.c_y * params.c_y, rho, variant);
    let c = erlang_c(params.n, params.offered_load()).expect("rho0 < 1 keeps A < n");
    params.mean_service() * (1.0 + c / (n * (1.0 - rho)) * phi)
}

pub fn mean_resp_jiq(params: &ClusterParams, variant: PhiVariant) -> f64 {
    let b = erlang_b(params.n, params.offered_load());
    b * mean_resp_rr(params, variant) + (1.0 - b) * mean_resp_lwl(params, variant)
}

pub fn mean_resp(policy: Policy, params: &ClusterParams, variant: PhiVariant) -> f64 {
    match policy {
        Policy::RR => mean_resp_rr(params, variant),
        Policy::LWL => mean_resp_lwl(params, variant),
        Policy::JIQ => mean_resp_jiq(params, variant),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelPoint {
    pub n: u32,
    pub mu: f64,
    pub mean_response: f64,
}

/// One prediction per entry of `n_list`; `params.n` is ignored.
pub fn model_curve(params: &ClusterParams, n_list: &[u32], policy: Policy, variant: PhiVariant) -> Result<Vec<ModelPoint>, String> {
    if n_list.is_empty() {
        return Err("n_list is empty".into());
    }
    n_list
        .iter()
        .map(|&n| {
            let p = params.with_n(n);
            p.validate()?;
            Ok(ModelPoint { n, mu: server_rate(&p), mean_response: mean_resp(policy, &p, variant) })
        })
        .collect()
}
