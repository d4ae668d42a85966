//! Side-by-side comparison with the published tables.

use lerchkit::baselines::GenPoissonVariant;
use lerchkit::data::{builtin, canonical_name, Dataset};
use lerchkit::estimate::{fit_minchi2, FitConfig, Method};
use lerchkit::gof::{self, chi2_sf, pearson_statistic, CountModel};
use lerchkit::{LerchDist, LerchParams};
use serde::Serialize;
use serde_json::json;

use crate::output::{fmt6, text_table};
use crate::{CliError, Output, ReproduceArgs};

const TABLES: [&str; 6] = ["sowbugs", "death", "beans", "yunoko", "urchin40", "urchin180"];

const P_TOL: f64 = 0.005;
const SSD_TOL: f64 = 5e-5;

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum Rule {
    /// `|value - target| ≤ tol`
    Within,
    /// `value ≤ target + tol`
    AtMost,
}

#[derive(Debug, Serialize)]
struct Check {
    what: String,
    value: f64,
    target: f64,
    tol: f64,
    rule: Rule,
    ok: bool,
}

fn check(what: impl Into<String>, value: f64, target: f64, tol: f64, rule: Rule) -> Check {
    let ok = match rule {
        Rule::Within => (value - target).abs() <= tol,
        Rule::AtMost => value <= target + tol,
    };
    Check {
        what: what.into(),
        value,
        target,
        tol,
        rule,
        ok,
    }
}

#[derive(Debug, Serialize)]
struct Row {
    count: u64,
    observed: f64,
    expected: f64,
    published: Option<f64>,
    ok: Option<bool>,
}

#[derive(Debug, Serialize)]
struct TableReport {
    table: String,
    dataset: String,
    refit: bool,
    params: LerchParams,
    rows: Vec<Row>,
    baseline_rows: Vec<Row>,
    checks: Vec<Check>,
    ok: bool,
}

impl TableReport {
    fn failures(&self) -> Vec<String> {
        let cells = |rows: &[Row], model: &str| {
            rows.iter()
                .filter(|r| r.ok == Some(false))
                .map(|r| {
                    format!(
                        "{}: {model} cell {} = {} vs {}",
                        self.table,
                        r.count,
                        fmt6(r.expected),
                        fmt6(r.published.unwrap_or(f64::NAN))
                    )
                })
                .collect::<Vec<_>>()
        };
        let mut out = cells(&self.rows, "Lerch");
        out.extend(cells(&self.baseline_rows, "baseline"));
        out.extend(self.checks.iter().filter(|c| !c.ok).map(|c| {
            format!(
                "{}: {} = {} vs {} (tol {})",
                self.table,
                c.what,
                fmt6(c.value),
                fmt6(c.target),
                fmt6(c.tol)
            )
        }));
        out
    }
}

fn column(ds: &Dataset, model: &impl CountModel, published: &[Option<f64>], tol: f64, compare: bool) -> Vec<Row> {
    let n = ds.table.n_total();
    ds.table
        .classes()
        .iter()
        .zip(published)
        .map(|(c, &want)| {
            let expected = n * model.pmf(c.count as i64);
            Row {
                count: c.count,
                observed: c.observed,
                expected,
                published: want,
                ok: want.filter(|_| compare).map(|w| (expected - w).abs() <= tol),
            }
        })
        .collect()
}

/// Adds X², p, d.o.f. and SSD checks for whichever of them were published.
#[allow(clippy::too_many_arguments)]
fn statistic_checks(
    checks: &mut Vec<Check>,
    label: &str,
    ds: &Dataset,
    model: &impl CountModel,
    n_params: u32,
    x2: Option<f64>,
    p: Option<f64>,
    dof: Option<u32>,
    ssd: Option<f64>,
    rule: Rule,
    x2_tol: f64,
) -> Result<(), CliError> {
    if let Some(target) = x2 {
        let (value, _) = pearson_statistic(&ds.table, model, &ds.grouping)?;
        checks.push(check(format!("{label} X²"), value, target, x2_tol, rule));
        let ours_dof = ds.grouping.len() as i64 - 1 - n_params as i64;
        if let Some(d) = dof {
            checks.push(check(format!("{label} dof"), ours_dof as f64, d as f64, 0.0, Rule::Within));
            if let Some(target) = p {
                checks.push(check(format!("{label} p"), chi2_sf(value, d), target, P_TOL, Rule::Within));
            }
        }
    }
    if let Some(target) = ssd {
        let value = gof::ssd(&ds.table, model);
        checks.push(check(format!("{label} SSD"), value, target, SSD_TOL, rule));
    }
    Ok(())
}

fn reproduce_one(table: &str, refit: bool, seed: u64) -> Result<TableReport, CliError> {
    let ds = builtin(table)?;
    let relative = ds.table.n_total() == 1.0;
    let (col_tol, x2_tol) = if relative { (5e-4, 1e-3) } else { (0.05, 0.01) };
    let pubd = &ds.published;

    let params = if refit {
        let cfg = FitConfig::new(Method::MinChi2)
            .with_truncation(ds.truncation)
            .with_grouping(ds.grouping.clone())
            .with_seed(seed);
        fit_minchi2(&ds.table, &cfg)?.params
    } else {
        pubd.params
    };
    let d = LerchDist::new(params, ds.truncation)?;
    let published: Vec<Option<f64>> = pubd.expected.iter().copied().map(Some).collect();
    let rows = column(&ds, &d, &published, col_tol, !refit);

    let mut checks = Vec::new();
    let rule = if refit { Rule::AtMost } else { Rule::Within };
    statistic_checks(
        &mut checks,
        "Lerch",
        &ds,
        &d,
        3,
        pubd.x2,
        pubd.p_value,
        pubd.dof,
        pubd.ssd,
        rule,
        x2_tol,
    )?;

    let mut baseline_rows = Vec::new();
    if let Some(b) = &ds.baseline {
        baseline_rows = column(&ds, &b.params, &b.expected, col_tol, true);
        let n_params = match b.params.variant {
            GenPoissonVariant::Standard => 2,
            GenPoissonVariant::RestrictedAdjusted { .. } => 3,
        };
        statistic_checks(
            &mut checks,
            "baseline",
            &ds,
            &b.params,
            n_params,
            b.x2,
            b.p_value,
            b.dof,
            b.ssd,
            Rule::Within,
            x2_tol,
        )?;
    }

    let ok = checks.iter().all(|c| c.ok)
        && rows.iter().chain(&baseline_rows).all(|r| r.ok != Some(false));
    Ok(TableReport {
        table: table.to_string(),
        dataset: ds.name,
        refit,
        params,
        rows,
        baseline_rows,
        checks,
        ok,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or("-".to_string(), fmt6)
}

fn mark(ok: Option<bool>) -> &'static str {
    match ok {
        Some(true) => "ok",
        Some(false) => "FAIL",
        None => "",
    }
}

fn render(r: &TableReport) -> String {
    let source = if r.refit { "refit" } else { "published parameters" };
    let mut out = format!(
        "{} ({source}: z = {}, s = {}, v = {})\n",
        r.table,
        fmt6(r.params.z),
        fmt6(r.params.s),
        fmt6(r.params.v)
    );
    let body: Vec<Vec<String>> = r
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut cells = vec![
                row.count.to_string(),
                fmt6(row.observed),
                fmt6(row.expected),
                opt(row.published),
                mark(row.ok).to_string(),
            ];
            if let Some(b) = r.baseline_rows.get(i) {
                cells.extend([fmt6(b.expected), opt(b.published), mark(b.ok).to_string()]);
            }
            cells
        })
        .collect();
    let header: &[&str] = if r.baseline_rows.is_empty() {
        &["count", "observed", "lerch", "published", ""]
    } else {
        &["count", "observed", "lerch", "published", "", "baseline", "published", ""]
    };
    out.push_str(&text_table(header, &body));
    let stats: Vec<Vec<String>> = r
        .checks
        .iter()
        .map(|c| {
            let tol = match c.rule {
                Rule::Within => format!("±{}", fmt6(c.tol)),
                Rule::AtMost => format!("≤ +{}", fmt6(c.tol)),
            };
            vec![
                c.what.clone(),
                fmt6(c.value),
                fmt6(c.target),
                tol,
                mark(Some(c.ok)).to_string(),
            ]
        })
        .collect();
    if !stats.is_empty() {
        out.push('\n');
        out.push_str(&text_table(&["statistic", "value", "published", "tolerance", ""], &stats));
    }
    out
}

pub fn run(args: &ReproduceArgs) -> Result<Output, CliError> {
    let tables: Vec<&str> = match &args.table {
        Some(t) => {
            if canonical_name(t).is_none() {
                return Err(CliError::Usage(format!(
                    "unknown table `{t}`; expected one of {}",
                    TABLES.join(", ")
                )));
            }
            vec![t.as_str()]
        }
        None => TABLES.to_vec(),
    };
    let reports = tables
        .iter()
        .map(|t| reproduce_one(t, args.refit, args.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let failures: Vec<String> = reports.iter().flat_map(TableReport::failures).collect();
    let ok = failures.is_empty();
    let mut text = reports.iter().map(render).collect::<Vec<_>>().join("\n");
    text.push_str(&format!(
        "\n{} of {} tables within tolerance\n",
        reports.iter().filter(|r| r.ok).count(),
        reports.len()
    ));
    for f in &failures {
        eprintln!("out of tolerance: {f}");
    }
    Ok(Output {
        json: json!({ "ok": ok, "tables": reports, "failures": failures }),
        text,
        code: if ok { 0 } else { 4 },
    })
}
