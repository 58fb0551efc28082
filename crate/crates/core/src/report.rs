//! Run orchestration and on-disk artifacts: per-node fields, loss history,
//! layer statistics, scores, resolved config and SVG plots.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::metrics::{requirements, restrict, score_problem, Requirement, ScoreReport, Solution, Variable};
use crate::plot::{band_chart, heatmap, line_chart, Series};
use crate::problems::{Oracle, ProblemCode, ProblemSpec};
use crate::reference::{reference_field, ReferenceField};
use crate::trainer::{train, TrainingTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub variable: Variable,
    pub requirement: Requirement,
    pub passed: bool,
}

/// Trained fields next to their reference, with scores over the comparison
/// region.
#[derive(Debug, Clone)]
pub struct SolutionReport {
    pub spec: ProblemSpec,
    pub trace: TrainingTrace,
    /// All interior nodes.
    pub solution: Solution,
    pub reference: ReferenceField,
    pub in_region: Vec<bool>,
    pub scores: Vec<ScoreReport>,
    pub checks: Vec<Check>,
}

/// Nodes where the reference is trusted: inside `compare_radius` for the
/// hole problem, everywhere otherwise.
pub fn in_comparison_region(oracle: &Oracle, x: [f64; 2]) -> bool {
    match *oracle {
        Oracle::Kirsch { compare_radius, .. } => x[0].hypot(x[1]) <= compare_radius,
        _ => true,
    }
}

/// Trains with `spec.train` and scores the result.
pub fn run(spec: &ProblemSpec) -> Result<(FieldModel, SolutionReport)> {
    spec.validate()?;
    let (field, trace) = train(spec, &spec.train)?;
    let report = assess(spec, &field, trace)?;
    Ok((field, report))
}

pub fn assess(spec: &ProblemSpec, field: &FieldModel, trace: TrainingTrace) -> Result<SolutionReport> {
    let nodes = spec.build_nodes()?;
    let solution = Solution::from_field(field, &spec.material, &nodes.points)?;
    let reference = reference_field(spec, &nodes)?;
    let in_region: Vec<bool> = nodes.points.iter().map(|&x| in_comparison_region(&spec.oracle, x)).collect();
    let (sol, r) = restrict(&solution, &reference, |x| in_comparison_region(&spec.oracle, x));
    let scores = score_problem(spec.code, &sol, &r)?;
    let checks = requirements(spec.code)
        .into_iter()
        .map(|(variable, requirement)| {
            let passed = scores
                .iter()
                .find(|s| s.variable == variable)
                .is_some_and(|s| requirement.check(s));
            Check {
                variable,
                requirement,
                passed,
            }
        })
        .collect();
    Ok(SolutionReport {
        spec: spec.clone(),
        trace,
        solution,
        reference,
        in_region,
        scores,
        checks,
    })
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

impl SolutionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn score(&self, v: Variable) -> Option<&ScoreReport> {
        self.scores.iter().find(|s| s.variable == v)
    }

    fn variables(&self) -> Vec<Variable> {
        Variable::ALL.into_iter().filter(|v| v.applies_to(self.spec.code)).collect()
    }

    /// `x1,x2,in_region` then `<var>_pred,<var>_ref` per variable.
    pub fn write_fields<W: Write>(&self, out: W) -> Result<()> {
        let vars = self.variables();
        let mut w = csv::Writer::from_writer(out);
        let mut head = vec!["x1".to_string(), "x2".into(), "in_region".into()];
        for v in &vars {
            head.push(format!("{v}_pred"));
            head.push(format!("{v}_ref"));
        }
        w.write_record(&head).map_err(csv_err)?;
        for (i, x) in self.solution.points.iter().enumerate() {
            let mut row = vec![num(x[0]), num(x[1]), (self.in_region[i] as u8).to_string()];
            for v in &vars {
                for s in [&self.solution.values[i], &self.reference.values[i]] {
                    row.push(v.of(s).map(num).unwrap_or_default());
                }
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `epoch,elastic,thermal,external,total`, loss before each update.
    pub fn write_loss<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "elastic", "thermal", "external", "total"])
            .map_err(csv_err)?;
        for (e, l) in self.trace.history.iter().enumerate() {
            w.write_record([e.to_string(), num(l.elastic), num(l.thermal), num(l.external), num(l.total)])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `epoch,network,layer,quantity,mean,std`.
    pub fn write_diagnostics<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "network", "layer", "quantity", "mean", "std"])
            .map_err(csv_err)?;
        for s in &self.trace.stats {
            let rows = [
                ("activation", s.activation),
                ("weight", Some(s.weight)),
                ("bias", Some(s.bias)),
                ("gradient", Some(s.gradient)),
            ];
            for (q, m) in rows {
                if let Some(m) = m {
                    w.write_record([
                        s.epoch.to_string(),
                        s.network.to_string(),
                        s.layer.to_string(),
                        q.to_string(),
                        num(m.mean),
                        num(m.std),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One row per scored variable with its acceptance outcome.
    pub fn write_scores<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "variable",
            "r2",
            "mse",
            "max_abs_error",
            "variance",
            "scale",
            "low_variance",
            "published_r2",
            "requirement",
            "passed",
        ])
        .map_err(csv_err)?;
        for s in &self.scores {
            let published = match s.variable.published_score(self.spec.code) {
                Some(Some(p)) => num(p),
                Some(None) => "<0".into(),
                None => String::new(),
            };
            let check = self.checks.iter().find(|c| c.variable == s.variable);
            w.write_record([
                s.variable.to_string(),
                num(s.r2),
                num(s.mse),
                num(s.max_abs_error),
                num(s.variance),
                num(s.scale),
                s.low_variance.to_string(),
                published,
                check.map(|c| c.requirement.to_string()).unwrap_or_default(),
                check.map(|c| c.passed.to_string()).unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn loss_plot(&self) -> String {
        let h = &self.trace.history;
        let pick = |f: fn(&crate::loss::LossBreakdown) -> f64| h.iter().enumerate().map(|(e, l)| (e as f64, f(l))).collect();
        let mut series = vec![
            Series::new("total", pick(|l| l.total)),
            Series::new("elastic", pick(|l| l.elastic)).dashed(),
            Series::new("external", pick(|l| l.external)).dashed(),
        ];
        if self.spec.code.is_thermal() {
            series.push(Series::new("thermal", pick(|l| l.thermal)).dashed());
        }
        line_chart(&format!("{} loss", self.spec.code), "epoch", "loss", &series)
    }

    /// Mean ± std band per layer for `quantity` over the captured epochs.
    pub fn diagnostics_plot(&self, quantity: &str) -> String {
        let mut keys: Vec<(usize, usize)> = self.trace.stats.iter().map(|s| (s.network, s.layer)).collect();
        keys.sort_unstable();
        keys.dedup();
        let bands = keys
            .into_iter()
            .map(|(n, l)| {
                let pts = self
                    .trace
                    .stats
                    .iter()
                    .filter(|s| s.network == n && s.layer == l)
                    .filter_map(|s| {
                        let m = match quantity {
                            "activation" => s.activation,
                            "weight" => Some(s.weight),
                            "bias" => Some(s.bias),
                            _ => Some(s.gradient),
                        }?;
                        Some((s.epoch as f64, m.mean, m.std))
                    })
                    .collect::<Vec<_>>();
                (format!("net {n} layer {l}"), pts)
            })
            .filter(|(_, p)| !p.is_empty())
            .collect::<Vec<_>>();
        band_chart(&format!("{} {quantity} distribution", self.spec.code), "epoch", quantity, &bands)
    }

    /// Predicted against reference for one variable: a line plot along the
    /// bar, or side-by-side heatmaps with the absolute error on plates.
    pub fn field_plot(&self, v: Variable) -> Option<String> {
        let pred: Vec<f64> = self.solution.values.iter().map(|s| v.of(s)).collect::<Option<_>>()?;
        let truth: Vec<f64> = self.reference.values.iter().map(|s| v.of(s)).collect::<Option<_>>()?;
        let pts = &self.solution.points;
        let title = format!("{} {v}", self.spec.code);
        Some(if self.spec.code.dim() == 1 {
            let line = |vals: &[f64]| pts.iter().zip(vals).map(|(x, &y)| (x[0], y)).collect();
            line_chart(
                &title,
                "x",
                v.label(),
                &[
                    Series::new("PINN", line(&pred)),
                    Series::new("reference", line(&truth)).dashed(),
                ],
            )
        } else {
            let err: Vec<f64> = pred.iter().zip(&truth).map(|(p, t)| (p - t).abs()).collect();
            let a = heatmap(&title, pts, &[("PINN", &pred), ("reference", &truth)]);
            let b = heatmap(&format!("{title} |error|"), pts, &[("|error|", &err)]);
            // stack the two charts vertically in one document
            let a = a.replacen("<svg ", "<svg y=\"0\" ", 1);
            let b = b.replacen("<svg ", "<svg y=\"400\" ", 1);
            format!(
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"620\" height=\"800\">{}{}</svg>\n",
                a.trim_end(),
                b.trim_end()
            )
        })
    }

    /// Writes every artifact into `dir` and returns the paths written.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut file = |name: &str, body: &dyn Fn(&mut fs::File) -> Result<()>| -> Result<()> {
            let path = dir.join(name);
            let mut f = fs::File::create(&path)?;
            body(&mut f)?;
            written.push(path);
            Ok(())
        };
        file("config.toml", &|f| Ok(f.write_all(self.spec.to_toml()?.as_bytes())?))?;
        file("fields.csv", &|f| self.write_fields(f))?;
        file("loss.csv", &|f| self.write_loss(f))?;
        file("diagnostics.csv", &|f| self.write_diagnostics(f))?;
        file("scores.csv", &|f| self.write_scores(f))?;
        file("loss.svg", &|f| Ok(f.write_all(self.loss_plot().as_bytes())?))?;
        for q in ["activation", "weight", "gradient"] {
            file(&format!("{q}s.svg"), &|f| Ok(f.write_all(self.diagnostics_plot(q).as_bytes())?))?;
        }
        for v in self.variables() {
            if let Some(svg) = self.field_plot(v) {
                file(&format!("field_{v}.svg"), &|f| Ok(f.write_all(svg.as_bytes())?))?;
            }
        }
        Ok(written)
    }
}

/// One problem's line in the reproduced table.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub code: ProblemCode,
    pub outcome: std::result::Result<(Vec<ScoreReport>, bool), String>,
}

impl TableRow {
    pub fn from_report(report: &SolutionReport) -> Self {
        Self {
            code: report.spec.code,
            outcome: Ok((report.scores.clone(), report.passed())),
        }
    }

    pub fn failed(code: ProblemCode, error: &Error) -> Self {
        Self {
            code,
            outcome: Err(error.to_string()),
        }
    }

    pub fn passed(&self) -> bool {
        matches!(self.outcome, Ok((_, true)))
    }

    fn cell(&self, v: Variable) -> String {
        match &self.outcome {
            Err(_) => "err".into(),
            Ok((scores, _)) => match scores.iter().find(|s| s.variable == v) {
                None => "-".into(),
                Some(s) if s.r2 < 0.0 => "<0".into(),
                Some(s) => format!("{:.2}%", 100.0 * s.r2),
            },
        }
    }
}

/// Fixed-width text grid, one row per problem.
pub fn format_table(rows: &[TableRow]) -> String {
    let mut out = format!("{:<22}", "Problem Code");
    for v in Variable::ALL {
        out.push_str(&format!("{:>9}", v.label()));
    }
    out.push_str("  result\n");
    for r in rows {
        out.push_str(&format!("{:<22}", r.code.as_str()));
        for v in Variable::ALL {
            out.push_str(&format!("{:>9}", r.cell(v)));
        }
        let verdict = match &r.outcome {
            Err(e) => format!("error: {e}"),
            Ok(_) if r.passed() => "pass".into(),
            Ok(_) => "FAIL".into(),
        };
        out.push_str(&format!("  {verdict}\n"));
    }
    out
}

/// CSV form of [`format_table`] with raw R² values.
pub fn write_table<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["code".to_string()];
    head.extend(Variable::ALL.iter().map(|v| v.to_string()));
    head.push("passed".into());
    w.write_record(&head).map_err(csv_err)?;
    for r in rows {
        let mut row = vec![r.code.to_string()];
        for v in Variable::ALL {
            row.push(match &r.outcome {
                Ok((scores, _)) => scores
                    .iter()
                    .find(|s| s.variable == v)
                    .map(|s| num(s.r2))
                    .unwrap_or_default(),
                Err(_) => String::new(),
            });
        }
        row.push(r.passed().to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
