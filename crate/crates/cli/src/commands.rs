//! Implementations of the CLI subcommands.

use ndarray::{Array2, Axis};
use pbn_core::exponential_family::{lambda_prime, mean_lambda};
use pbn_core::gamma_inverse::gamma_inverse;
use pbn_core::manifold_sampler::{conditional_mean_oracle_with_grid, default_start, run_chain};
use pbn_core::numerics::linalg::inf_norm;
use pbn_core::pbn::{PbnNetwork, ReconstructMode};
use pbn_core::{ActivationKind, LayerMap, RngStream, SolverConfig};

use crate::io::{fmt_f64, read_matrix, read_vector, OutputFile};
use crate::{
    ActivationsArgs, CliError, InvertArgs, OracleArgs, ReconstructArgs, SampleArgs, TrainArgs,
};

fn parse_kind(s: &str) -> Result<ActivationKind, CliError> {
    ActivationKind::parse(s).map_err(CliError::from)
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t
    } else {
        t.exp().ln_1p()
    }
}

pub fn cmd_activations(args: &ActivationsArgs) -> Result<(), CliError> {
    let kind = parse_kind(&args.kind)?;
    if args.points < 2 {
        return Err(CliError::input("need at least 2 grid points".into()));
    }
    if args.min >= args.max {
        return Err(CliError::input(format!(
            "empty grid: min {} >= max {}",
            args.min, args.max
        )));
    }
    if !kind.contains_theta(args.min) || !kind.contains_theta(args.max) {
        return Err(CliError::input(format!(
            "grid [{}, {}] leaves the domain of {kind}",
            args.min, args.max
        )));
    }
    let mut out = OutputFile::with_config(
        "activations",
        &[
            ("kind", kind.to_string()),
            ("min", fmt_f64(args.min)),
            ("max", fmt_f64(args.max)),
            ("points", args.points.to_string()),
            ("out", args.out.clone()),
        ],
    );
    out.comment("columns: theta,lambda,lambda_prime,sigmoid,softplus");
    let step = (args.max - args.min) / (args.points - 1) as f64;
    let mut gap_sigmoid = 0.0f64;
    let mut gap_softplus = 0.0f64;
    for i in 0..args.points {
        let t = args.min + step * i as f64;
        let lam = mean_lambda(kind, t)?;
        let der = lambda_prime(kind, t)?;
        gap_sigmoid = gap_sigmoid.max((lam - sigmoid(t)).abs());
        gap_softplus = gap_softplus.max((lam - softplus(t)).abs());
        out.row(&[t, lam, der, sigmoid(t), softplus(t)]);
    }
    out.comment(format!("max_abs_gap_sigmoid,{}", fmt_f64(gap_sigmoid)));
    out.comment(format!("max_abs_gap_softplus,{}", fmt_f64(gap_softplus)));
    out.write(&args.out)
}

pub fn cmd_invert(args: &InvertArgs) -> Result<(), CliError> {
    let kind = parse_kind(&args.kind)?;
    let w = read_matrix(&args.weights, args.has_header)?;
    let z = read_vector(&args.feature, args.has_header)?;
    if z.len() != w.ncols() {
        return Err(CliError::input(format!(
            "feature has {} entries but W has {} columns",
            z.len(),
            w.ncols()
        )));
    }
    let map = LayerMap::new(w, kind)?;
    let cfg = SolverConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        ..SolverConfig::default()
    };
    let sol = gamma_inverse(&map, &z.view(), &cfg)?;
    let mut out = OutputFile::with_config(
        "invert",
        &[
            ("kind", kind.to_string()),
            ("weights", args.weights.clone()),
            ("feature", args.feature.clone()),
            ("tol", fmt_f64(args.tol)),
            ("max_iter", args.max_iter.to_string()),
            ("has_header", args.has_header.to_string()),
            ("out", args.out.clone()),
        ],
    );
    out.labeled_row("h", sol.h.as_slice().unwrap());
    out.labeled_row("x_hat", sol.x_hat.as_slice().unwrap());
    out.labeled_value("residual_inf", fmt_f64(sol.residual_inf));
    out.labeled_value("iterations", sol.iterations);
    out.labeled_value("converged", sol.converged);
    out.write(&args.out)?;
    if sol.converged {
        Ok(())
    } else {
        Err(CliError::infeasible(format!(
            "solver did not converge: residual {:e} after {} iterations (solution written to {})",
            sol.residual_inf, sol.iterations, args.out
        )))
    }
}

pub fn cmd_sample(args: &SampleArgs) -> Result<(), CliError> {
    let kind = parse_kind(&args.kind)?;
    let w = read_matrix(&args.weights, args.has_header)?;
    let z = read_vector(&args.feature, args.has_header)?;
    if z.len() != w.ncols() {
        return Err(CliError::input(format!(
            "feature has {} entries but W has {} columns",
            z.len(),
            w.ncols()
        )));
    }
    if args.chains == 0 {
        return Err(CliError::input("need at least one chain".into()));
    }
    let map = LayerMap::new(w.clone(), kind)?;
    let x0 = default_start(&map, &z.view())?;

    // independent chains on sub-streams of the same seed, merged by index
    let mut chunks: Vec<Array2<f64>> = Vec::with_capacity(args.chains);
    if args.chains == 1 {
        chunks.push(run_chain(
            &map,
            &z.view(),
            &x0.view(),
            args.burn_in,
            args.samples,
            args.thin,
            RngStream::new(args.seed),
        )?);
    } else {
        let results: Vec<Result<Array2<f64>, pbn_core::Error>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..args.chains)
                .map(|c| {
                    let map = &map;
                    let z = &z;
                    let x0 = &x0;
                    scope.spawn(move || {
                        run_chain(
                            map,
                            &z.view(),
                            &x0.view(),
                            args.burn_in,
                            args.samples,
                            args.thin,
                            RngStream::with_stream(args.seed, c as u64),
                        )
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for r in results {
            chunks.push(r?);
        }
    }
    let total = args.chains * args.samples;
    let n = map.input_dim();
    let mut samples = Array2::<f64>::zeros((total, n));
    for (c, chunk) in chunks.iter().enumerate() {
        samples
            .slice_mut(ndarray::s![c * args.samples..(c + 1) * args.samples, ..])
            .assign(chunk);
    }

    let sol = gamma_inverse(&map, &z.view(), &SolverConfig::default())?;
    let mean = samples.mean_axis(Axis(0)).unwrap();
    let mut max_residual = 0.0f64;
    for row in samples.rows() {
        max_residual = max_residual.max(inf_norm(&(&w.t().dot(&row) - &z).view()));
    }
    let mut out = OutputFile::with_config(
        "sample",
        &[
            ("kind", kind.to_string()),
            ("weights", args.weights.clone()),
            ("feature", args.feature.clone()),
            ("burn_in", args.burn_in.to_string()),
            ("samples", args.samples.to_string()),
            ("thin", args.thin.to_string()),
            ("chains", args.chains.to_string()),
            ("seed", args.seed.to_string()),
            ("has_header", args.has_header.to_string()),
            ("out", args.out.clone()),
        ],
    );
    for row in samples.rows() {
        out.row(row.as_slice().unwrap());
    }
    out.comment(format!(
        "mean,{}",
        mean.iter()
            .map(|&v| fmt_f64(v))
            .collect::<Vec<_>>()
            .join(",")
    ));
    out.comment(format!("max_manifold_residual,{}", fmt_f64(max_residual)));
    out.comment(format!(
        "x_hat,{}",
        sol.x_hat
            .iter()
            .map(|&v| fmt_f64(v))
            .collect::<Vec<_>>()
            .join(",")
    ));
    let dev = inf_norm(&(&mean - &sol.x_hat).view());
    out.comment(format!("max_mean_minus_x_hat,{}", fmt_f64(dev)));
    out.write(&args.out)
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<(), CliError> {
    let kind = parse_kind(&args.kind)?;
    let w = read_matrix(&args.weights, args.has_header)?;
    let z = read_vector(&args.feature, args.has_header)?;
    if z.len() != w.ncols() {
        return Err(CliError::input(format!(
            "feature has {} entries but W has {} columns",
            z.len(),
            w.ncols()
        )));
    }
    if w.nrows() - w.ncols() > 2 {
        return Err(CliError::input(format!(
            "oracle restricted to desk scale (N - M <= 2), got N - M = {}",
            w.nrows() - w.ncols()
        )));
    }
    let map = LayerMap::new(w, kind)?;
    let mean = conditional_mean_oracle_with_grid(&map, &z.view(), args.grid_points)?;
    let mut out = OutputFile::with_config(
        "oracle",
        &[
            ("kind", kind.to_string()),
            ("weights", args.weights.clone()),
            ("feature", args.feature.clone()),
            ("grid_points", args.grid_points.to_string()),
            ("has_header", args.has_header.to_string()),
            ("out", args.out.clone()),
        ],
    );
    out.labeled_row("x_bar", mean.as_slice().unwrap());
    out.write(&args.out)
}

fn parse_arch(spec: &str) -> Result<Vec<usize>, CliError> {
    let dims: Result<Vec<usize>, _> = spec.split('-').map(|t| t.trim().parse::<usize>()).collect();
    let dims = dims.map_err(|e| CliError::input(format!("bad architecture '{spec}': {e}")))?;
    if dims.len() < 2 {
        return Err(CliError::input(format!(
            "architecture '{spec}' needs at least two widths"
        )));
    }
    if dims.windows(2).any(|w| w[0] <= w[1]) || dims.contains(&0) {
        return Err(CliError::input(format!(
            "architecture '{spec}' must have strictly decreasing positive widths"
        )));
    }
    Ok(dims)
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let kind = parse_kind(&args.kind)?;
    let dims = parse_arch(&args.arch)?;
    let data = read_matrix(&args.data, args.has_header)?;
    if data.ncols() != dims[0] {
        return Err(CliError::input(format!(
            "data rows have {} columns but the architecture expects {}",
            data.ncols(),
            dims[0]
        )));
    }
    let mut rng = RngStream::new(args.seed);
    let mut net = PbnNetwork::random(&dims, kind, &mut rng)?;
    let cfg = SolverConfig::default();
    let trace = net.train_autoencoder(&data, args.epochs, args.step, &cfg)?;

    std::fs::write(&args.model_out, net.to_bytes())
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", args.model_out)))?;

    let mut out = OutputFile::with_config(
        "train",
        &[
            ("kind", kind.to_string()),
            ("arch", args.arch.clone()),
            ("data", args.data.clone()),
            ("epochs", args.epochs.to_string()),
            ("step", fmt_f64(args.step)),
            ("seed", args.seed.to_string()),
            ("has_header", args.has_header.to_string()),
            ("model_out", args.model_out.clone()),
            ("trace_out", args.trace_out.clone()),
        ],
    );
    out.comment("columns: epoch,loss (entry 0 is the pre-training loss)");
    for (e, loss) in trace.iter().enumerate() {
        out.labeled_value(&e.to_string(), fmt_f64(*loss));
    }
    out.write(&args.trace_out)
}

pub fn cmd_reconstruct(args: &ReconstructArgs) -> Result<(), CliError> {
    let mode = match args.mode.as_str() {
        "deterministic" => ReconstructMode::Deterministic,
        "stochastic" => ReconstructMode::Stochastic,
        other => {
            return Err(CliError::input(format!(
                "unknown mode '{other}' (expected deterministic|stochastic)"
            )))
        }
    };
    let bytes = std::fs::read(&args.model)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", args.model)))?;
    let net = PbnNetwork::from_bytes(&bytes)?;
    let data = read_matrix(&args.data, args.has_header)?;
    if data.ncols() != net.input_dim() {
        return Err(CliError::input(format!(
            "data rows have {} columns but the model expects {}",
            data.ncols(),
            net.input_dim()
        )));
    }
    let cfg = SolverConfig::default();
    let mut rng = RngStream::new(args.seed);
    let mut out = OutputFile::with_config(
        "reconstruct",
        &[
            ("model", args.model.clone()),
            ("data", args.data.clone()),
            ("mode", args.mode.clone()),
            ("seed", args.seed.to_string()),
            ("has_header", args.has_header.to_string()),
            ("out", args.out.clone()),
        ],
    );
    out.comment("columns: reconstruction (input_dim values), feature_residual_inf");
    let mut attempts = 0usize;
    let mut successes = 0usize;
    let mut sse = 0.0;
    for x in data.rows() {
        attempts += 1;
        let fp = net.forward(&x)?;
        let z = fp.final_feature().clone();
        match net.backward_reconstruct(&z.view(), mode, Some(&mut rng), &cfg) {
            Ok(rec) => {
                successes += 1;
                let z_again = net.forward(&rec.x_hat.view())?;
                let residual = inf_norm(&(z_again.final_feature() - &z).view());
                let diff = &rec.x_hat - &x;
                sse += diff.dot(&diff);
                let mut row: Vec<f64> = rec.x_hat.to_vec();
                row.push(residual);
                out.row(&row);
            }
            Err(pbn_core::Error::ReconstructionInfeasible { .. }) => {
                out.row(&vec![f64::NAN; net.input_dim() + 1]);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let mse = if successes > 0 {
        sse / successes as f64
    } else {
        f64::NAN
    };
    out.comment(format!("mse,{}", fmt_f64(mse)));
    out.comment(format!(
        "sampling_efficiency,{successes},{attempts},{}",
        fmt_f64(successes as f64 / attempts.max(1) as f64)
    ));
    out.write(&args.out)
}
