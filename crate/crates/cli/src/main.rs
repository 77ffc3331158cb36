use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pinsim::approx::{BuiltinShape, DctTerm, FunctionForm, MpAtom, RbfTerm, SeqRef, Term, WavePair};
use pinsim::frame::{decode_frame, encode_any, Frame, FrameContext, PAYLOAD_LEN};
use pinsim::harness::{
    emit_csv, run_delay_binary, run_delay_wave, run_manipulation, run_shape_experiment, DelayResult,
    ShapeConfig, TrajectoryScript, BINARY_REPLICATES, WAVE_REPLICATES,
};
use pinsim::module_sim::MotorParams;

#[derive(Parser)]
#[command(name = "pinsim", version, about = "Pin-array shape display simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Delay between first and last module for uniform on/off refreshes.
    DelayBinary(DelayArgs),
    /// Delay between first and last module for a traveling quarter-wave.
    DelayWave(WaveArgs),
    /// Relative shape error against frames sent, for the built-in shapes.
    Shapes(ShapeArgs),
    /// Moves a Gaussian bump around a square loop.
    Manipulate(ManipulateArgs),
    /// Encodes one term into a frame and decodes it again.
    Encode(EncodeArgs),
}

#[derive(Args)]
struct DelayArgs {
    /// Module counts (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8, 16])]
    n: Vec<usize>,
    /// Message periods in ms (comma separated).
    #[arg(long = "tmsg-ms", value_delimiter = ',', default_values_t = [5u64, 10, 20])]
    tmsg_ms: Vec<u64>,
    /// Control methods; defaults to seq and the broadcast method.
    #[arg(long, value_delimiter = ',')]
    method: Vec<FunctionForm>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Write results as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WaveArgs {
    #[command(flatten)]
    delay: DelayArgs,
    /// Wave period in ms.
    #[arg(long = "period-ms", default_value_t = 3000)]
    period_ms: u64,
}

#[derive(Args)]
struct ShapeArgs {
    /// Shapes (comma separated); all by default.
    #[arg(long, value_delimiter = ',')]
    shape: Vec<BuiltinShape>,
    /// Methods among seq, dct, mp; all three by default.
    #[arg(long, value_delimiter = ',')]
    method: Vec<FunctionForm>,
    /// Send at most this many frames.
    #[arg(long)]
    terms: Option<usize>,
    /// Pass every term through the 8-byte frame format.
    #[arg(long)]
    quantized: bool,
    /// Seed of the random shape and of the height noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussian noise on height readings, in mm.
    #[arg(long = "noise-mm")]
    noise_mm: Option<f64>,
    /// Runs averaged per point when noise is on.
    #[arg(long, default_value_t = 6)]
    replicates: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ManipulateArgs {
    /// Side of a square module array.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Override the array shape.
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Run length in seconds; one loop by default.
    #[arg(long = "duration-s")]
    duration_s: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    /// Function form of the term.
    #[arg(long, default_value = "mp")]
    method: FunctionForm,
    /// Number of modules the frame addresses.
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Term fields, comma separated:
    /// dct `index,a`; mp `a,s,p,k,phase`; rbf `a,width,x,y`;
    /// wave `k,a,b`; seq `module,h_mm`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    params: Vec<f64>,
    /// Decode a 9-byte hex frame (header then payload) instead.
    #[arg(long, conflicts_with = "params")]
    decode: Option<String>,
    /// Message identifier for a decoded SEQ frame.
    #[arg(long = "seq-id")]
    seq_id: Option<u16>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::DelayBinary(a) => delay(&a, None),
        Command::DelayWave(a) => delay(&a.delay, Some(a.period_ms)),
        Command::Shapes(a) => shapes(&a),
        Command::Manipulate(a) => manipulate(&a),
        Command::Encode(a) => encode(&a),
    }
}

fn delay(args: &DelayArgs, period_ms: Option<u64>) -> Result<()> {
    let broadcast = if period_ms.is_some() { FunctionForm::Wave } else { FunctionForm::Dct };
    let methods = if args.method.is_empty() {
        vec![FunctionForm::Seq, broadcast]
    } else {
        args.method.clone()
    };
    for m in &methods {
        if *m != FunctionForm::Seq && *m != broadcast {
            bail!("method `{m}` not available here (use seq or {broadcast})");
        }
    }
    let reps = args.replicates.unwrap_or(if period_ms.is_some() { WAVE_REPLICATES } else { BINARY_REPLICATES });

    let mut cells = Vec::new();
    for &m in &methods {
        for &t in &args.tmsg_ms {
            for &n in &args.n {
                cells.push((n, t, m));
            }
        }
    }
    // cells are independent; run them side by side and keep the input order
    let results: Vec<DelayResult> = thread::scope(|s| {
        let handles: Vec<_> = cells
            .iter()
            .map(|&(n, t, m)| {
                s.spawn(move || match period_ms {
                    Some(p) => run_delay_wave(n, t, m, p, reps),
                    None => run_delay_binary(n, t, m, reps),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| anyhow!("worker panicked"))?.map_err(Into::into))
            .collect::<Result<_>>()
    })?;

    println!("{:>4} {:>6} {:>6} {:>10} {:>10}", "n", "t_msg", "method", "tau_ms", "pred_ms");
    // keep -0.000 out of the table
    let z = |x: f64| if x.abs() < 5e-4 { 0.0 } else { x };
    for r in &results {
        println!(
            "{:>4} {:>6} {:>6} {:>10.3} {:>10.3}",
            r.n, r.t_msg_ms, r.method, z(r.tau_measured_ms), r.tau_predicted_ms
        );
    }
    if let Some(out) = &args.out {
        emit_csv(&results[..], out)?;
    }
    Ok(())
}

fn shapes(args: &ShapeArgs) -> Result<()> {
    let shapes = if args.shape.is_empty() { BuiltinShape::ALL.to_vec() } else { args.shape.clone() };
    let methods = if args.method.is_empty() {
        vec![FunctionForm::Seq, FunctionForm::Dct, FunctionForm::Mp]
    } else {
        args.method.clone()
    };
    let mut curves = Vec::new();
    for &shape in &shapes {
        for &method in &methods {
            let mut cfg = ShapeConfig::new(method).quantized(args.quantized);
            cfg.max_terms = args.terms;
            cfg.seed = args.seed;
            cfg.noise_mm = args.noise_mm;
            cfg.replicates = args.replicates;
            let curve = run_shape_experiment(shape, &cfg)?;
            let last = curve.points.last().expect("curve has the zero-term point");
            println!(
                "{:<9} {:<4} frames {:>2}  error {:.4e}  20% at {}",
                shape.name(),
                method,
                last.terms_used,
                last.rel_error,
                curve.terms_to_reach(0.2).map_or("-".into(), |k| k.to_string())
            );
            curves.push(curve);
        }
    }
    if let Some(out) = &args.out {
        emit_csv(&curves[..], out)?;
    }
    Ok(())
}

fn manipulate(args: &ManipulateArgs) -> Result<()> {
    let rows = args.rows.unwrap_or(args.n);
    let cols = args.cols.unwrap_or(args.n);
    let mut script = TrajectoryScript::demo();
    if (rows, cols) != (4, 4) {
        let square = TrajectoryScript::rectangle(cols, rows, 50.0, 50.0, script.pitch_mm, script.speed_mm_s);
        script.waypoints = square.waypoints;
    }
    script.duration_s = args.duration_s;
    let run = run_manipulation(&script, cols, rows)?;
    println!(
        "{} ticks over {:.3} s, {} frames, mean speed {:.2} mm/s",
        run.ticks.len(),
        run.duration_s(),
        run.frames_sent(),
        run.mean_speed_mm_s()
    );
    if let Some(out) = &args.out {
        emit_csv(&run, out)?;
    }
    Ok(())
}

fn parse_hex(s: &str) -> Result<[u8; PAYLOAD_LEN + 1]> {
    let clean: String = s.chars().filter(|c| !c.is_whitespace() && *c != ':').collect();
    let clean = clean.trim_start_matches("0x");
    if clean.len() != 2 * (PAYLOAD_LEN + 1) {
        bail!("expected {} hex bytes, got `{s}`", PAYLOAD_LEN + 1);
    }
    let mut out = [0u8; PAYLOAD_LEN + 1];
    for (i, b) in out.iter_mut().enumerate() {
        *b = u8::from_str_radix(&clean[2 * i..2 * i + 2], 16).with_context(|| format!("bad hex `{s}`"))?;
    }
    Ok(out)
}

fn term_from(method: FunctionForm, p: &[f64]) -> Result<Term> {
    let want = match method {
        FunctionForm::Dct | FunctionForm::Seq => 2,
        FunctionForm::Mp => 5,
        FunctionForm::Rbf => 4,
        FunctionForm::Wave => 3,
    };
    if p.len() != want {
        bail!("{method} needs {want} values in --params, got {}", p.len());
    }
    let index = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(anyhow!("index must be a non-negative integer, got {v}"))
        }
    };
    Ok(match method {
        FunctionForm::Dct => DctTerm { index: index(p[0])?, amplitude: p[1] }.into(),
        FunctionForm::Mp => MpAtom { amplitude: p[0], scale: p[1], position: p[2], frequency: p[3], phase: p[4] }.into(),
        FunctionForm::Rbf => RbfTerm { amplitude: p[0], width: p[1], center_x: p[2], center_y: p[3] }.into(),
        FunctionForm::Wave => WavePair { wavevector: p[0], cos_amp: p[1], sin_amp: p[2] }.into(),
        FunctionForm::Seq => SeqRef { module: index(p[0])?, height: p[1] }.into(),
    })
}

fn encode(args: &EncodeArgs) -> Result<()> {
    if args.n == 0 {
        bail!("--n must be positive");
    }
    let ctx = FrameContext::new(args.n, MotorParams::default().stroke_mm);
    let frame = match &args.decode {
        Some(hex) => {
            let bytes = parse_hex(hex)?;
            let mut payload = [0u8; PAYLOAD_LEN];
            payload.copy_from_slice(&bytes[1..]);
            Frame::new(bytes[0], payload, args.seq_id)
        }
        None => {
            let term = term_from(args.method, &args.params)?;
            println!("term    {term:?}");
            encode_any(&term, &ctx)?
        }
    };
    let hex: Vec<String> = frame.to_bytes().iter().map(|b| format!("{b:02x}")).collect();
    println!("frame   {}", hex.join(" "));
    if let Some(id) = frame.seq_id {
        println!("seq_id  {id}");
    }
    println!("decoded {:?}", decode_frame(&frame, &ctx)?);
    Ok(())
}
