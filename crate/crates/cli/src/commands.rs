//! Implementations of the subcommands.

use std::fs;
use std::path::PathBuf;

use ndarray::Array1;

use rkhs_meta::io::{
    load_gram, load_model, read_matrix_csv, read_vector_csv, save_gram, save_model, save_path,
    write_error_matrix_csv, write_sobol_csv, write_vector_csv, ModelFile, PathFile,
};
use rkhs_meta::{
    analytic_sobol, build_group_set, compute_gram, cross_gram, empirical_sobol, evaluate_metrics,
    fit_path, fit_qmax, group_lasso_fit, mu_grid, mu_max, predict, prediction_error, rep_streams,
    rgs_fit, select_best, DesignData, EigenGram, Error, FitConfig, GFunctionSpec, GroupSet,
    KernelKind, RepOutcome, Result, TuningGrid,
};

use crate::config::{resolve, resolve_required, Defaults};
use crate::{BenchArgs, DataArgs, FitArgs, GramArgs, KernelArgs, PredictArgs, QmaxArgs, SobolArgs, SolverArgs, TuneArgs};

const DEFAULT_TOL: f64 = 1e-8;

struct KernelSettings {
    kind: KernelKind,
    dmax: usize,
    tol: f64,
    correction: bool,
}

fn kernel_settings(args: &KernelArgs, defaults: &Defaults) -> Result<KernelSettings> {
    let kernel_name =
        resolve_required(args.kernel.clone(), defaults.kernel.clone(), "kernel")?;
    let kind: KernelKind = kernel_name.parse()?;
    let dmax = resolve_required(args.dmax, defaults.dmax, "dmax")?;
    let tol = resolve(args.tol, defaults.tol, DEFAULT_TOL);
    Ok(KernelSettings { kind, dmax, tol, correction: !args.no_correction })
}

fn solver_settings(args: &SolverArgs, defaults: &Defaults, verbose: bool) -> FitConfig {
    FitConfig {
        max_iter: resolve(args.max_iter, defaults.max_iter, 1000),
        crit_tol: resolve(args.crit_tol, defaults.crit_tol, 1e-4),
        par_tol: resolve(args.par_tol, defaults.par_tol, 1e-4),
        weights_gamma: None,
        weights_mu: None,
        paper_literal_zero_test: args.paper_literal_zero_test,
        verbose,
    }
}

fn load_design(args: &DataArgs) -> Result<DesignData> {
    let x = read_matrix_csv(&args.x, args.header)?;
    let y = match &args.y {
        Some(path) => read_vector_csv(path, args.header)?,
        None => Array1::zeros(x.nrows()),
    };
    DesignData::new(x, y)
}

fn grid_settings(args: &crate::GridArgs, defaults: &Defaults) -> Result<(Vec<f64>, Vec<f64>)> {
    let frc = resolve_required(args.frc.clone(), defaults.frc.clone(), "frc")?;
    let gamma = resolve_required(args.gamma.clone(), defaults.gamma.clone(), "gamma")?;
    Ok((frc, gamma))
}

/// Loads the Gram cache when the file exists (verifying the key), or
/// computes the decompositions and writes the cache when a path was given
/// but nothing is there yet.
fn grams_with_cache(
    data: &DesignData,
    groups: &GroupSet,
    settings: &KernelSettings,
    cache: Option<&PathBuf>,
) -> Result<EigenGram> {
    if let Some(path) = cache {
        if path.exists() {
            return load_gram(path, data, settings.kind, settings.dmax, settings.tol);
        }
    }
    let grams = compute_gram(data, groups, settings.kind, settings.correction, settings.tol)?;
    if let Some(path) = cache {
        save_gram(path, &grams, data)?;
    }
    Ok(grams)
}

fn provenance(command: &str, fields: serde_json::Value) -> serde_json::Value {
    serde_json::json!({ "command": command, "settings": fields })
}

pub fn gram(args: &GramArgs, defaults: &Defaults) -> Result<()> {
    let settings = kernel_settings(&args.kernel, defaults)?;
    let data = load_design(&args.data)?;
    let groups = build_group_set(data.d(), settings.dmax)?;
    let grams = compute_gram(&data, &groups, settings.kind, settings.correction, settings.tol)?;
    save_gram(&args.out, &grams, &data)?;
    let corrected = grams.iter().filter(|e| e.corrected).count();
    println!(
        "gram: {} groups over {} observations ({} corrected) -> {}",
        grams.len(),
        grams.n(),
        corrected,
        args.out.display()
    );
    Ok(())
}

pub fn fit(args: &FitArgs, defaults: &Defaults, verbose: bool) -> Result<()> {
    let settings = kernel_settings(&args.kernel, defaults)?;
    let cfg = solver_settings(&args.solver, defaults, verbose);
    let (frc, gammas) = grid_settings(&args.grid, defaults)?;
    let data = load_design(&args.data)?;
    if args.data.y.is_none() {
        return Err(Error::InvalidArgument("fit requires --y".into()));
    }
    let groups = build_group_set(data.d(), settings.dmax)?;
    let grams = grams_with_cache(&data, &groups, &settings, args.gram.as_ref())?;
    let mmax = mu_max(data.y(), &grams);
    let grid = TuningGrid::new(mu_grid(mmax, data.n(), &frc)?, gammas)?;
    let path = fit_path(data.y(), &grams, &grid, &cfg)?;
    let prov = provenance(
        "fit",
        serde_json::json!({
            "kernel": settings.kind.name(), "dmax": settings.dmax, "tol": settings.tol,
            "frc": frc, "gamma": grid.gammas, "mu_max": mmax,
            "max_iter": cfg.max_iter, "crit_tol": cfg.crit_tol, "par_tol": cfg.par_tol,
        }),
    );
    let doc = PathFile::from_path(&path, &groups, settings.kind, data.x(), Some(prov));
    save_path(&args.out, &doc)?;
    println!(
        "fit: {} models ({} mus x {} gammas) -> {}",
        path.len(),
        grid.mus.len(),
        grid.gammas.len(),
        args.out.display()
    );
    Ok(())
}

pub fn tune(args: &TuneArgs, defaults: &Defaults, verbose: bool) -> Result<()> {
    let settings = kernel_settings(&args.kernel, defaults)?;
    let cfg = solver_settings(&args.solver, defaults, verbose);
    let (frc, gammas) = grid_settings(&args.grid, defaults)?;
    let data = load_design(&args.data)?;
    if args.data.y.is_none() {
        return Err(Error::InvalidArgument("tune requires --y".into()));
    }
    let xtest = read_matrix_csv(&args.xtest, args.data.header)?;
    let ytest = read_vector_csv(&args.ytest, args.data.header)?;
    let groups = build_group_set(data.d(), settings.dmax)?;
    let grams = grams_with_cache(&data, &groups, &settings, args.gram.as_ref())?;
    let mmax = mu_max(data.y(), &grams);
    let grid = TuningGrid::new(mu_grid(mmax, data.n(), &frc)?, gammas)?;
    let path = fit_path(data.y(), &grams, &grid, &cfg)?;
    let errors = prediction_error(&path, &data, &grams, xtest.view(), &ytest)?;

    fs::create_dir_all(&args.out_dir)?;
    write_error_matrix_csv(&args.out_dir.join("errors.csv"), &grid.mus, &grid.gammas, &errors)?;

    let (i, j, entry) = select_best(&errors, &path)?;
    let mut best = entry.model.clone();
    let (best_mu, best_gamma) = (entry.mu, entry.gamma);
    if args.step_two && best_gamma > 0.0 {
        // re-run the selected model's descent over all groups from its
        // group-lasso initializer
        let sqrt_n = (data.n() as f64).sqrt();
        let lasso = group_lasso_fit(data.y(), &grams, sqrt_n * best_mu, &cfg, None)?;
        best = rgs_fit(data.y(), &grams, best_mu, best_gamma, &lasso, &cfg, true)?;
    }
    let prov = provenance(
        "tune",
        serde_json::json!({
            "kernel": settings.kind.name(), "dmax": settings.dmax, "tol": settings.tol,
            "frc": frc, "gamma": grid.gammas, "mu_max": mmax,
            "selected_mu": best_mu, "selected_gamma": best_gamma,
            "step_two": args.step_two,
            "max_iter": cfg.max_iter, "crit_tol": cfg.crit_tol, "par_tol": cfg.par_tol,
        }),
    );
    let doc = ModelFile::from_model(&best, &groups, settings.kind, data.x(), Some(prov));
    save_model(&args.out_dir.join("best_model.json"), &doc)?;
    let report = empirical_sobol(&best, &groups)?;
    write_sobol_csv(&args.out_dir.join("sobol.csv"), &report, &groups)?;
    println!(
        "tune: best model at mu={best_mu} gamma={best_gamma} (cell {i},{j}), \
         {} active groups -> {}",
        best.nsupp(),
        args.out_dir.display()
    );
    Ok(())
}

pub fn qmax(args: &QmaxArgs, defaults: &Defaults, verbose: bool) -> Result<()> {
    let settings = kernel_settings(&args.kernel, defaults)?;
    let cfg = solver_settings(&args.solver, defaults, verbose);
    let gammas = resolve_required(args.grid.gamma.clone(), defaults.gamma.clone(), "gamma")?;
    let data = load_design(&args.data)?;
    if args.data.y.is_none() {
        return Err(Error::InvalidArgument("qmax requires --y".into()));
    }
    let groups = build_group_set(data.d(), settings.dmax)?;
    let grams = grams_with_cache(&data, &groups, &settings, args.gram.as_ref())?;
    let result = fit_qmax(data.y(), &grams, &gammas, args.qmax, args.rat, args.num, &cfg)?;

    fs::create_dir_all(&args.out_dir)?;
    let mut probes = String::from("mu_g,q\n");
    for (m, q) in result.mus_tried.iter().zip(&result.qs) {
        probes.push_str(&format!("{m},{q}\n"));
    }
    fs::write(args.out_dir.join("probes.csv"), probes)?;
    let summary = serde_json::json!({
        "found": result.found,
        "mu_qmax": result.mu_qmax,
        "qmax": args.qmax,
        "rat": args.rat,
        "num": args.num,
    });
    fs::write(args.out_dir.join("summary.json"), summary.to_string())?;

    if result.found {
        let prov = provenance(
            "qmax",
            serde_json::json!({
                "kernel": settings.kind.name(), "dmax": settings.dmax,
                "qmax": args.qmax, "rat": args.rat, "num": args.num,
                "mu_qmax": result.mu_qmax,
            }),
        );
        let doc = PathFile::from_path(&result.path, &groups, settings.kind, data.x(), Some(prov));
        save_path(&args.out_dir.join("models.json"), &doc)?;
        for entry in &result.path.entries {
            println!(
                "qmax: gamma={} -> active groups {:?}",
                entry.gamma,
                entry.model.support_names(&groups)
            );
        }
    } else {
        println!(
            "qmax: no penalty with exactly {} active groups within {} probes (qs: {:?})",
            args.qmax, args.num, result.qs
        );
    }
    Ok(())
}

pub fn predict_cmd(args: &PredictArgs) -> Result<()> {
    let doc = load_model(&args.model)?;
    let kind = doc.kernel;
    let (model, groups, train_x) = doc.into_parts()?;
    let xtest = read_matrix_csv(&args.xtest, args.header)?;
    let train = DesignData::new(train_x, Array1::zeros(model.n()))?;
    let cross = cross_gram(&train, xtest.view(), &groups, kind)?;
    let yhat = predict(&model, &cross, !args.no_intercept)?;
    write_vector_csv(&args.out, &yhat)?;
    println!("predict: {} points -> {}", yhat.len(), args.out.display());
    Ok(())
}

pub fn sobol_cmd(args: &SobolArgs) -> Result<()> {
    let doc = load_model(&args.model)?;
    let (model, groups, _train_x) = doc.into_parts()?;
    let report = empirical_sobol(&model, &groups)?;
    write_sobol_csv(&args.out, &report, &groups)?;
    println!(
        "sobol: {} active groups, index sum {} -> {}",
        model.nsupp(),
        report.sum(),
        args.out.display()
    );
    Ok(())
}

fn parse_coefficients(text: &str, d: usize) -> Result<Vec<f64>> {
    if text == "canonical" {
        return Ok(GFunctionSpec::canonical(d, 0)
            .map(|s| s.c)
            .expect("canonical coefficients"));
    }
    let c: Vec<f64> = text
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad coefficient {tok:?}")))
        })
        .collect::<Result<_>>()?;
    if c.len() != d {
        return Err(Error::InvalidArgument(format!(
            "--c has {} entries but --d is {d}",
            c.len()
        )));
    }
    Ok(c)
}

pub fn bench(args: &BenchArgs, defaults: &Defaults, verbose: bool) -> Result<()> {
    let settings = kernel_settings(&args.kernel, defaults)?;
    let cfg = solver_settings(&args.solver, defaults, verbose);
    let (frc, gammas) = grid_settings(&args.grid, defaults)?;
    let sigma = resolve(args.sigma, None, 0.2);
    let seed = resolve(args.seed, defaults.seed, 0);
    let c = parse_coefficients(&args.c, args.d)?;
    let spec = GFunctionSpec::new(args.d, c, sigma, seed)?;
    let groups = build_group_set(args.d, settings.dmax)?;
    let (_truth_groups, truth) = analytic_sobol(&spec.c, settings.dmax)?;

    let mut reps: Vec<RepOutcome> = Vec::with_capacity(args.reps);
    let mut selections: Vec<(usize, f64, f64, usize)> = Vec::new();
    for rep in 0..args.reps {
        let (train_stream, test_stream) = rep_streams(rep as u64);
        let train = rkhs_meta::generate_dataset(&spec, args.n, train_stream)?;
        let test = rkhs_meta::generate_dataset(&spec, args.n, test_stream)?;
        let grams = compute_gram(&train, &groups, settings.kind, settings.correction, settings.tol)?;
        let mmax = mu_max(train.y(), &grams);
        let grid = TuningGrid::new(mu_grid(mmax, args.n, &frc)?, gammas.clone())?;
        let path = fit_path(train.y(), &grams, &grid, &cfg)?;
        let errors = prediction_error(&path, &train, &grams, test.x().view(), test.y())?;
        let (_, _, entry) = select_best(&errors, &path)?;
        let indices = empirical_sobol(&entry.model, &groups)?.indices;
        selections.push((rep, entry.mu, entry.gamma, entry.model.nsupp()));
        if verbose {
            eprintln!(
                "[bench] rep {rep}: selected mu={} gamma={} nsupp={}",
                entry.mu,
                entry.gamma,
                entry.model.nsupp()
            );
        }
        reps.push(RepOutcome { train, model: entry.model.clone(), indices });
    }

    let metrics = evaluate_metrics(
        &reps,
        &spec,
        &groups,
        settings.kind,
        args.n_eval,
        &truth,
        1e-4,
    )?;

    fs::create_dir_all(&args.out_dir)?;
    let mut sel = String::from("rep,mu,gamma,nsupp,gpe\n");
    for ((rep, mu, gamma, nsupp), gpe) in selections.iter().zip(&metrics.gpe_by_rep) {
        sel.push_str(&format!("{rep},{mu},{gamma},{nsupp},{gpe}\n"));
    }
    fs::write(args.out_dir.join("selections.csv"), sel)?;

    let mut m = String::from("metric,value\n");
    m.push_str(&format!("gpe,{}\n", metrics.gpe));
    m.push_str(&format!("gpe_median,{}\n", metrics.median_gpe()));
    m.push_str(&format!("mse,{}\n", metrics.mse));
    m.push_str(&format!("mse_x1e4,{}\n", metrics.mse * 1e4));
    m.push_str(&format!("re,{}\n", metrics.re));
    fs::write(args.out_dir.join("metrics.csv"), m)?;

    // mean empirical indices across repetitions, with the analytic truth
    let nr = reps.len() as f64;
    let mut s = String::from("group,cardinality,mean_index,true_index\n");
    for (v, g) in groups.iter().enumerate() {
        let mean = reps.iter().map(|r| r.indices[v]).sum::<f64>() / nr;
        s.push_str(&format!("{},{},{},{}\n", g.name(), g.len(), mean, truth[v]));
    }
    fs::write(args.out_dir.join("sobol.csv"), s)?;

    println!(
        "bench: {} reps done; GPE mean {:.5} median {:.5}, MSE(x1e4) {:.3}, RE {:.4} -> {}",
        args.reps,
        metrics.gpe,
        metrics.median_gpe(),
        metrics.mse * 1e4,
        metrics.re,
        args.out_dir.display()
    );
    Ok(())
}
