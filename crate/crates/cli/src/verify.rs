//! Certificate report for a tableau.

use std::fmt::Write as _;
use std::path::Path;

use savgl::tableau::{
    check_algebraic_stability, check_consistency, check_diagonal_stability, check_mrk_order_conditions,
    parse_tableau, BuiltinScheme, GltdTableau, MrkCoefficients, OrderCondition,
};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub text: String,
    /// Names of the conditions that failed; empty when everything passed.
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Loads a built-in name or a tableau file.
pub fn load(target: &str) -> CliResult<GltdTableau> {
    if let Some(s) = BuiltinScheme::from_name(target) {
        return Ok(s.tableau());
    }
    let path = Path::new(target);
    let text = std::fs::read_to_string(path).map_err(CliError::io(format!("reading tableau {}", path.display())))?;
    parse_tableau(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn condition_name(c: OrderCondition) -> String {
    match c {
        OrderCondition::B(l) => format!("B({l})"),
        OrderCondition::C { l, stage } => format!("C({l}) at stage {}", stage + 1),
    }
}

pub fn verify(t: &GltdTableau) -> CliResult<VerifyReport> {
    let mut text = String::new();
    let mut failures = Vec::new();
    let cfg = |e: savgl::Error| CliError::Config(e.to_string());

    let _ = writeln!(text, "tableau {}: s = {}, r = {}, p = {}, q = {}", t.name(), t.s(), t.r(), t.p(), t.q());
    let _ = writeln!(
        text,
        "  q_hat = {}, nu = {}, expected convergence order {}",
        t.q_hat(),
        t.nu(),
        t.expected_order()
    );

    let _ = writeln!(text, "consistency:");
    let consistency = check_consistency(t).map_err(cfg)?;
    for &(cond, res) in &consistency.residuals {
        let ok = res <= savgl::tableau::CONSISTENCY_TOL;
        let _ = writeln!(text, "  {:<28} residual {res:.3e}  {}", cond.formula(), verdict(ok));
        if !ok {
            failures.push(format!("consistency {}", cond.formula()));
        }
    }

    match t.certificate() {
        None => {
            let _ = writeln!(text, "stability: no certificate weights  FAIL");
            failures.push("missing stability certificate".into());
        }
        Some(w) => {
            match check_algebraic_stability(t, &w.g, &w.h) {
                Ok(c) => {
                    let _ = writeln!(
                        text,
                        "algebraic stability: min eig M = {:.3e}, min eig G = {:.3e}  {}",
                        c.min_eig_m,
                        c.min_eig_g,
                        verdict(c.passed())
                    );
                    if !c.passed() {
                        failures.push("algebraic stability".into());
                    }
                }
                Err(e) => {
                    let _ = writeln!(text, "algebraic stability: {e}  FAIL");
                    failures.push("algebraic stability".into());
                }
            }
            match check_diagonal_stability(t, &w.h_tilde) {
                Ok(c) => {
                    let _ = writeln!(
                        text,
                        "diagonal stability: min eig(H~D11 + D11'H~) = {:.3e}  {}",
                        c.min_eig_m,
                        verdict(c.passed())
                    );
                    if !c.passed() {
                        failures.push("diagonal stability".into());
                    }
                }
                Err(e) => {
                    let _ = writeln!(text, "diagonal stability: {e}  FAIL");
                    failures.push("diagonal stability".into());
                }
            }
        }
    }

    match MrkCoefficients::from_tableau(t) {
        Err(_) => {
            let _ = writeln!(text, "order conditions: not MRK-structured, skipped");
        }
        Ok(_) => {
            let report = check_mrk_order_conditions(t, t.p(), t.q()).map_err(cfg)?;
            let worst = report.residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max);
            let _ = writeln!(
                text,
                "order conditions B({}) C({}): max residual {worst:.3e}  {}",
                t.p(),
                t.q(),
                verdict(report.passed())
            );
            for &(cond, res) in report.residuals.iter().filter(|(_, r)| *r > savgl::tableau::CONSISTENCY_TOL) {
                let _ = writeln!(text, "  {} residual {res:.3e}  FAIL", condition_name(cond));
                failures.push(format!("order condition {}", condition_name(cond)));
            }
        }
    }

    let _ = writeln!(text, "overall: {}", verdict(failures.is_empty()));
    Ok(VerifyReport { text, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_pass() {
        for s in BuiltinScheme::ALL {
            let report = verify(&s.tableau()).unwrap();
            assert!(report.passed(), "{}", report.text);
        }
    }

    #[test]
    fn theta_scheme_reports_first_order_expectation() {
        let report = verify(&load("savgl1").unwrap()).unwrap();
        assert!(report.text.contains("q_hat = 1"), "{}", report.text);
        assert!(report.text.contains("expected convergence order 1"), "{}", report.text);
    }
}
