use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sbm_core::degree_profiling::{degree_profiling, DegreeProfilingOptions};
use sbm_core::divergence::{self, ch_divergence, divergence_matrix_with, profile, DivergenceMode};
use sbm_core::evaluation::{agreement, exact_match, sweep_csv, SweepConfig};
use sbm_core::io::{self, ParamsDocument};
use sbm_core::poisson::{least_squares_slope, overlap_sum};
use sbm_core::spectral::{eigen_summary, theorem1_conditions_of};
use sbm_core::sphere::{reliable_classification, resolve_hyperparams, SphereOverrides};
use sbm_core::{sample_graph, split_edges, ModelParams, Result, SbmError};

use crate::{
    DetectExactArgs, DetectPartialArgs, DivergenceArgs, Format, GenArgs, OracleArgs, ParamsArgs, SphereFlags,
    SplitArgs, SweepArgs,
};

fn load_params(path: &Path) -> Result<(ParamsDocument, ModelParams)> {
    let doc = io::read_params(path)?;
    let params = doc.to_params()?;
    Ok((doc, params))
}

fn resolve_seed(flag: Option<u64>, doc: Option<&ParamsDocument>) -> u64 {
    flag.or_else(|| doc.and_then(|d| d.seed)).unwrap_or(0)
}

fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn sphere_overrides(f: &SphereFlags) -> SphereOverrides {
    SphereOverrides {
        c: f.c,
        m: f.m,
        epsilon: f.epsilon,
        x: f.x,
        runs: f.runs,
        r: f.r,
        r_prime: f.r_prime,
        budget: f.budget,
    }
}

fn read_truth(path: Option<&Path>, n: usize) -> Result<Option<Vec<usize>>> {
    let Some(path) = path else { return Ok(None) };
    let labels = io::read_labels(path)?;
    if labels.len() != n {
        return Err(SbmError::LengthMismatch(labels.len(), n));
    }
    Ok(Some(labels))
}

pub fn gen(args: &GenArgs) -> Result<()> {
    let (doc, params) = load_params(&args.params)?;
    let seed = resolve_seed(args.seed, Some(&doc));
    let planted = sample_graph(&params, args.n, seed)?;
    io::write_graph(&args.out, &planted.graph)?;
    if let Some(path) = &args.labels_out {
        io::write_labels(path, &planted.labels)?;
    }
    emit(&format!("seed: {seed}\nvertices: {}\nedges: {}\n", args.n, planted.graph.edge_count()))
}

pub fn split(args: &SplitArgs) -> Result<()> {
    let graph = io::read_graph(&args.graph)?;
    let seed = resolve_seed(args.seed, None);
    let parts = split_edges(&graph, args.prob, seed)?;
    io::write_graph(&args.selected_out, &parts.selected)?;
    io::write_graph(&args.remainder_out, &parts.remainder)?;
    emit(&format!(
        "seed: {seed}\nselected edges: {}\nremaining edges: {}\n",
        parts.selected.edge_count(),
        parts.remainder.edge_count()
    ))
}

fn matrix_table(rows: usize, value: impl Fn(usize, usize) -> f64, format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Text => {
            let _ = write!(out, "{:>4}", "");
            for j in 0..rows {
                let _ = write!(out, " {j:>12}");
            }
            out.push('\n');
            for i in 0..rows {
                let _ = write!(out, "{i:>4}");
                for j in 0..rows {
                    let _ = write!(out, " {:>12.6}", value(i, j));
                }
                out.push('\n');
            }
        }
        Format::Csv => {
            let header: Vec<String> = (0..rows).map(|j| j.to_string()).collect();
            let _ = writeln!(out, "community,{}", header.join(","));
            for i in 0..rows {
                let row: Vec<String> = (0..rows).map(|j| format!("{:?}", value(i, j))).collect();
                let _ = writeln!(out, "{i},{}", row.join(","));
            }
        }
    }
    out
}

pub fn divergence(args: &DivergenceArgs) -> Result<()> {
    let (_, params) = load_params(&args.common.params)?;
    let mode = if args.extended { DivergenceMode::Extended } else { DivergenceMode::Strict };
    let m = divergence_matrix_with(&params, mode)?;
    let mut out = matrix_table(params.k(), |i, j| m.dplus[(i, j)], args.common.format);
    if m.zero_support && args.common.format == Format::Text {
        out.push_str("note: some profiles have zero entries\n");
    }
    emit(&out)
}

pub fn finest_partition(args: &ParamsArgs) -> Result<()> {
    let (_, params) = load_params(&args.params)?;
    let partition = divergence::finest_partition(&params)?.groups().to_vec();
    let mut out = String::new();
    match args.format {
        Format::Text => {
            for (g, members) in partition.iter().enumerate() {
                let names: Vec<String> = members.iter().map(usize::to_string).collect();
                let _ = writeln!(out, "group {g}: {}", names.join(" "));
            }
        }
        Format::Csv => {
            out.push_str("community,group\n");
            for c in 0..params.k() {
                let g = partition.iter().position(|m| m.contains(&c)).expect("partition covers every community");
                let _ = writeln!(out, "{c},{g}");
            }
        }
    }
    emit(&out)
}

pub fn spectral(args: &ParamsArgs) -> Result<()> {
    let (_, params) = load_params(&args.params)?;
    let s = eigen_summary(&params)?;
    let cond = theorem1_conditions_of(&params, &s)?;
    let mut out = String::new();
    let interval = |iv: Option<(f64, f64)>| iv.map_or("empty".to_string(), |(a, b)| format!("({a:.6}, {b:.6})"));
    let rho = s.rho.map_or("undefined".to_string(), |r| format!("{r:.6}"));
    match args.format {
        Format::Text => {
            out.push_str("eigenvalue    multiplicity\n");
            for (l, m) in s.distinct.iter().zip(&s.multiplicities) {
                let _ = writeln!(out, "{l:>12.6}  {m}");
            }
            let _ = writeln!(out, "eta: {}", s.eta);
            let _ = writeln!(out, "rho: {rho}");
            let _ = writeln!(out, "rho > 4: {}", cond.rho_gt_4);
            let _ = writeln!(out, "lambda^7 < lambda'^8: {}", cond.pow7_lt_pow8);
            let _ = writeln!(out, "4 lambda^3 < lambda'^4: {}", cond.four_cube_lt_fourth);
            let _ = writeln!(out, "min separation: {:.6}", cond.min_separation);
            let _ = writeln!(out, "x interval: {}", interval(cond.feasible_x_interval));
            let _ = writeln!(out, "epsilon interval: {}", interval(cond.epsilon_interval));
            let _ = writeln!(out, "all conditions hold: {}", cond.all_hold());
        }
        Format::Csv => {
            out.push_str("key,value\n");
            for (l, m) in s.distinct.iter().zip(&s.multiplicities) {
                let _ = writeln!(out, "eigenvalue,{l:?}");
                let _ = writeln!(out, "multiplicity,{m}");
            }
            let _ = writeln!(out, "eta,{}", s.eta);
            let _ = writeln!(out, "rho,{}", s.rho.map_or(String::new(), |r| r.to_string()));
            let _ = writeln!(out, "rho_gt_4,{}", cond.rho_gt_4);
            let _ = writeln!(out, "pow7_lt_pow8,{}", cond.pow7_lt_pow8);
            let _ = writeln!(out, "four_cube_lt_fourth,{}", cond.four_cube_lt_fourth);
            let _ = writeln!(out, "min_separation,{}", cond.min_separation);
            let _ = writeln!(out, "x_upper,{}", cond.x_upper);
            let _ = writeln!(out, "all_hold,{}", cond.all_hold());
        }
    }
    emit(&out)
}

pub fn detect_partial(args: &DetectPartialArgs) -> Result<()> {
    let (doc, params) = load_params(&args.params)?;
    let graph = io::read_graph(&args.graph)?;
    let truth = read_truth(args.labels.as_deref(), graph.n())?;
    let seed = resolve_seed(args.seed, Some(&doc));
    let overrides = sphere_overrides(&args.sphere);
    let spectral = eigen_summary(&params)?;
    let hyper = resolve_hyperparams(&params, graph.n(), &spectral, &overrides)?;
    let mut out = String::new();
    let _ = writeln!(out, "seed: {seed}");
    let _ = writeln!(
        out,
        "hyperparameters: c={} m={} epsilon={:.6} x={:.6} runs={} r={} r'={} budget={}",
        hyper.c, hyper.m, hyper.epsilon, hyper.x, hyper.runs, hyper.r, hyper.r_prime, hyper.budget
    );
    let _ = writeln!(out, "conditions hold: {}", hyper.conditions_hold);
    let res = reliable_classification(&graph, &params, &hyper, seed)?;
    if let Some(path) = &args.out {
        io::write_labels(path, &res.labels)?;
    }
    let _ = writeln!(out, "runs failed: {} of {}", res.runs_failed, res.runs);
    let _ = writeln!(out, "runs discarded: {}", res.runs_discarded);
    let _ = writeln!(out, "discard threshold: {:.6}", res.discard_threshold);
    let _ = writeln!(out, "forced fraction: {:.6}", res.forced_fraction);
    if let Some(truth) = truth {
        let _ = writeln!(out, "accuracy: {:.6}", agreement(&res.labels, &truth, params.k())?.accuracy);
    }
    emit(&out)
}

pub fn detect_exact(args: &DetectExactArgs) -> Result<()> {
    let (doc, params) = load_params(&args.params)?;
    let graph = io::read_graph(&args.graph)?;
    let truth = read_truth(args.labels.as_deref(), graph.n())?;
    let seed = resolve_seed(args.seed, Some(&doc));
    let options = DegreeProfilingOptions { gamma: args.gamma, sphere: sphere_overrides(&args.sphere) };
    let mut out = String::new();
    let _ = writeln!(out, "seed: {seed}");
    let res = degree_profiling(&graph, &params, seed, &options)?;
    if let Some(path) = &args.out {
        io::write_labels(path, &res.assignment.assignment)?;
    }
    let groups = &res.assignment.groups;
    let shown: Vec<String> = groups
        .iter()
        .map(|g| format!("{{{}}}", g.iter().map(usize::to_string).collect::<Vec<_>>().join(",")))
        .collect();
    let _ = writeln!(out, "finest partition: {}", shown.join(" "));
    let _ = writeln!(out, "gamma: {:.6}", res.gamma);
    let _ = writeln!(out, "forced fraction: {:.6}", res.forced_fraction);
    if let Some(truth) = truth {
        if !res.refined.is_empty() {
            let _ = writeln!(out, "refined accuracy: {:.6}", agreement(&res.refined, &truth, params.k())?.accuracy);
        }
        let mut group_of = vec![0; params.k()];
        for (g, members) in groups.iter().enumerate() {
            for &c in members {
                group_of[c] = g;
            }
        }
        let truth_groups = truth
            .iter()
            .enumerate()
            .map(|(v, &c)| {
                group_of.get(c).copied().ok_or(SbmError::LabelOutOfRange { vertex: v, label: c, k: params.k() })
            })
            .collect::<Result<Vec<_>>>()?;
        let g = groups.len();
        let _ = writeln!(out, "group accuracy: {:.6}", agreement(&res.assignment.assignment, &truth_groups, g)?.accuracy);
        let exact = exact_match(&res.assignment.assignment, &truth_groups, g)?;
        let _ = writeln!(out, "exact match: {}", if exact { "yes" } else { "no" });
    }
    emit(&out)
}

pub fn oracle(args: &OracleArgs) -> Result<()> {
    let (theta1, theta2, p1, p2) = match &args.params {
        Some(path) => {
            let (_, params) = load_params(path)?;
            let (i, j) = (args.pair[0], args.pair[1]);
            let prior = |c: usize| {
                params.prior().get(c).copied().ok_or(SbmError::IndexOutOfRange { index: c, len: params.k() })
            };
            (profile(&params, i)?.theta, profile(&params, j)?.theta, prior(i)?, prior(j)?)
        }
        None if !args.theta1.is_empty() => (args.theta1.clone(), args.theta2.clone(), args.p1, args.p2),
        None => return Err(SbmError::ParameterError("give --params or --theta1/--theta2".into())),
    };
    let mut out = String::from("ln_n,value,tail_bound,box\n");
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &lnn in &args.ln_n {
        let est = overlap_sum(&theta1, &theta2, p1, p2, lnn)?;
        let bounds: Vec<String> = est.truncation_box.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{lnn},{:e},{:e},{}", est.value, est.tail_bound, bounds.join(";"));
        if est.value > 0.0 {
            xs.push(lnn);
            ys.push(-est.value.ln());
        }
    }
    if xs.len() >= 2 {
        let _ = writeln!(out, "exponent,{:.6},,", least_squares_slope(&xs, &ys));
    }
    if let Ok(d) = ch_divergence(&theta1, &theta2) {
        let _ = writeln!(out, "ch_divergence,{:.6},,", d.value);
    }
    emit(&out)
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec)?;
    let config: SweepConfig = toml::from_str(&text).map_err(|e| SbmError::Parse(e.to_string()))?;
    let rows = sbm_core::evaluation::sweep(&config)?;
    let csv = sweep_csv(&rows);
    match &args.out {
        Some(path) => {
            fs::write(path, csv)?;
            emit(&format!("seed: {}\nrows: {}\n", config.seed, rows.len()))
        }
        None => {
            eprintln!("seed: {}", config.seed);
            emit(&csv)
        }
    }
}
