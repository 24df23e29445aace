//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on a domain error, 2 on a usage error.

use std::error::Error;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::approximation::{self, CircleMap};
use crate::dyadic::{DyadicPartition, DyadicRational};
use crate::semicontinuous::{self, Route, Theory};
use crate::tensor;
use crate::tessellation::{self, Cutoff, Tessellation};
use crate::thompson::{self, TreeDiagram};

const ROUTE_TOLERANCE: f64 = 1e-12;
const PERFECT_TOLERANCE: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(
    name = "thompson-holo",
    version,
    about = "Holographic states, Thompson's group T and its unitary action"
)]
struct Cli {
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that a tensor is perfect and report its isometry constants.
    VerifyTensor {
        /// Builtin name (four-colour, qutrit-code, singlet) or tensor file.
        tensor: String,
    },
    /// Reduced diagram of f∘g.
    Compose { f: String, g: String },
    /// Reduced diagram of f.
    Reduce { f: String },
    /// Exact image of a dyadic point.
    Eval { f: String, x: String },
    /// Vacuum matrix element of an element of T.
    MatrixElement {
        word: String,
        #[arg(long, default_value = "four-colour")]
        tensor: String,
        #[arg(long, value_enum, default_value_t = RouteArg::Both)]
        route: RouteArg,
    },
    /// Approximate a circle map by an element of T.
    Approximate {
        /// identity, rotation:p/2^n, mobius:a,b or a file of "x f(x)" lines.
        map: String,
        #[arg(long)]
        level: u32,
    },
    /// Flip sequence realizing an element on the standard tessellation.
    Flips {
        word: String,
        #[arg(long, default_value_t = 6)]
        depth: u32,
    },
    /// Entanglement entropy of the two-sided ring state.
    BtzEntropy {
        #[arg(long)]
        halfwidth: usize,
        #[arg(long, default_value = "four-colour")]
        tensor: String,
    },
    /// Write an SVG figure.
    ///
    /// Objects: standard[:depth], image:<word>[:depth], cutoff:<partition>,
    /// diagram:<element> or a bare element.
    Render {
        object: String,
        #[arg(long)]
        out: PathBuf,
        /// Draw Farey labels on tessellations.
        #[arg(long)]
        labels: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum RouteArg {
    Action,
    Diagram,
    Both,
}

type Res<T> = Result<T, Box<dyn Error>>;

struct Output {
    text: String,
    json: Value,
    code: i32,
}

impl Output {
    fn ok(text: String, json: Value) -> Self {
        Self {
            text,
            json,
            code: 0,
        }
    }
}

/// Formats to 15 significant digits without trailing zeros.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.14e}").parse().expect("float text");
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    rounded.to_string()
}

fn round15(x: f64) -> f64 {
    format_number(x).parse().unwrap_or(x)
}

fn format_complex(z: Complex64) -> String {
    if round15(z.im) == 0.0 || z.im.abs() <= 1e-15 * z.re.abs().max(1.0) {
        format_number(z.re)
    } else if z.im < 0.0 {
        format!("{} - {}i", format_number(z.re), format_number(-z.im))
    } else {
        format!("{} + {}i", format_number(z.re), format_number(z.im))
    }
}

fn complex_json(z: Complex64) -> Value {
    json!({ "re": round15(z.re), "im": round15(z.im) })
}

fn element(s: &str) -> Res<TreeDiagram> {
    Ok(thompson::parse_element(s)?)
}

fn verify_tensor(name: &str) -> Res<Output> {
    let t = tensor::resolve(name)?;
    let cert = tensor::verify_perfect(&t, PERFECT_TOLERANCE)?;
    let n = t.rank();
    let classes = cert.constants_by_class();
    let mut parts = vec![
        "perfect: yes".to_string(),
        format!(
            "rotation-invariant: {}",
            if cert.rotation_invariant { "yes" } else { "no" }
        ),
    ];
    for (k, c) in &classes {
        parts.push(format!("{k}→{} constant: {}", n - k, format_number(*c)));
    }
    let constants: serde_json::Map<String, Value> = classes
        .iter()
        .map(|(k, c)| (format!("{k}->{}", n - k), json!(round15(*c))))
        .collect();
    let json = json!({
        "tensor": name,
        "legs": n,
        "perfect": true,
        "rotation_invariant": cert.rotation_invariant,
        "constants": constants,
        "splits_checked": cert.splits.len(),
    });
    Ok(Output::ok(parts.join("; "), json))
}

fn diagram_output(f: &TreeDiagram) -> Output {
    Output::ok(
        f.to_string(),
        json!({ "element": f.to_string(), "tree": f.to_json() }),
    )
}

fn matrix_element(word: &str, tensor_name: &str, route: RouteArg) -> Res<Output> {
    let f = element(word)?;
    let theory = Theory::resolve(tensor_name)?;
    let routes: Vec<(Route, &str)> = match route {
        RouteArg::Action => vec![(Route::Action, "action")],
        RouteArg::Diagram => vec![(Route::Diagram, "diagram")],
        RouteArg::Both => vec![(Route::Action, "action"), (Route::Diagram, "diagram")],
    };
    let mut lines = Vec::new();
    let mut values = Vec::new();
    let mut json = serde_json::Map::new();
    json.insert("element".into(), json!(thompson::reduce(&f).to_string()));
    json.insert("tensor".into(), json!(tensor_name));
    for (r, label) in routes {
        let z = semicontinuous::vacuum_matrix_element(&f, &theory, r)?;
        lines.push(format!("{label}: {}", format_complex(z)));
        json.insert(label.into(), complex_json(z));
        values.push(z);
    }
    let mut code = 0;
    if values.len() == 2 {
        let agree = (values[0] - values[1]).norm() <= ROUTE_TOLERANCE;
        lines.push(
            if agree {
                "routes agree"
            } else {
                "routes disagree"
            }
            .to_string(),
        );
        json.insert("routes_agree".into(), json!(agree));
        if !agree {
            code = 1;
        }
    }
    Ok(Output {
        text: lines.join("\n"),
        json: Value::Object(json),
        code,
    })
}

fn approximate(map: &str, level: u32) -> Res<Output> {
    let f = CircleMap::resolve(map)?;
    let r = approximation::approximate(&f, level)?;
    let text = [
        format!("map: {}", f.name()),
        format!("level: {}", r.n),
        format!("element: {}", thompson::reduce(&r.element)),
        format!("range: {}", r.range_partition),
        format!("marker interval: {}", r.marker_interval),
        format!("sup error: {}", format_number(r.sup_error)),
        format!("ties: {}", r.ties.len()),
    ]
    .join("\n");
    let json = json!({
        "map": f.name(),
        "level": r.n,
        "element": thompson::reduce(&r.element).to_string(),
        "diagram": r.element.to_string(),
        "domain_partition": r.domain_partition.to_string(),
        "range_partition": r.range_partition.to_string(),
        "marker_interval": r.marker_interval,
        "sup_error": round15(r.sup_error),
        "ties": r.ties.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
    });
    Ok(Output::ok(text, json))
}

fn flips(word: &str, depth: u32) -> Res<Output> {
    let f = element(word)?;
    let real = tessellation::flips_realizing(&f, depth)?;
    let replay = real.apply()?;
    let image = tessellation::apply_element(&Tessellation::standard_on(&real.window)?, &f)?;
    let matches = replay.same_as(&image);
    let flips: Vec<String> = real.flips.iter().map(|g| g.to_string()).collect();
    let text = [
        format!("element: {}", thompson::reduce(&f)),
        format!("window: {}", real.window),
        format!("flips ({}): {}", flips.len(), flips.join(", ")),
        format!("doe: {}", replay.doe()),
        format!("matches image: {}", if matches { "yes" } else { "no" }),
    ]
    .join("\n");
    let json = json!({
        "element": thompson::reduce(&f).to_string(),
        "window": real.window.to_string(),
        "flips": real.flips.iter().map(|g| g.to_json()).collect::<Vec<_>>(),
        "tessellation": replay.to_json(),
        "matches_image": matches,
    });
    Ok(Output {
        text,
        json,
        code: if matches { 0 } else { 1 },
    })
}

fn btz_entropy(halfwidth: usize, tensor_name: &str) -> Res<Output> {
    let theory = Theory::resolve(tensor_name)?;
    let state = semicontinuous::btz_state(halfwidth, &theory)?;
    let sa = state.entropy_a()?;
    let sb = state.entropy_b()?;
    let bound = state.cut_bonds as f64 * (theory.d() as f64).ln();
    let text = [
        format!("halfwidth: {halfwidth}"),
        format!("legs: A {} B {}", state.a_legs.len(), state.b_legs.len()),
        format!("S(A): {}", format_number(sa)),
        format!("S(B): {}", format_number(sb)),
        format!("cut bonds: {}", state.cut_bonds),
        format!("bound: {}", format_number(bound)),
    ]
    .join("\n");
    let json = json!({
        "halfwidth": halfwidth,
        "tensor": tensor_name,
        "a_legs": state.a_legs.len(),
        "b_legs": state.b_legs.len(),
        "entropy_a": round15(sa),
        "entropy_b": round15(sb),
        "cut_bonds": state.cut_bonds,
        "bound": round15(bound),
    });
    Ok(Output::ok(text, json))
}

fn parse_depth(s: Option<&str>, default: u32) -> Res<u32> {
    match s {
        None => Ok(default),
        Some(d) => d
            .trim()
            .parse()
            .map_err(|_| format!("Parse: bad depth {d:?}").into()),
    }
}

fn render_object(object: &str, labels: bool) -> Res<String> {
    let (kind, rest) = object.split_once(':').unwrap_or((object, ""));
    let rest = (!rest.is_empty()).then_some(rest);
    match kind {
        "standard" => {
            let t = Tessellation::standard(parse_depth(rest, 2)?);
            Ok(tessellation::render_tessellation(&t, labels))
        }
        "image" => {
            let rest = rest.ok_or("Parse: image needs a word, as in image:A")?;
            let (w, depth) = match rest.split_once(':') {
                Some((w, d)) => (w, parse_depth(Some(d), 2)?),
                None => (rest, 2),
            };
            let t = tessellation::apply_element(&Tessellation::standard(depth), &element(w)?)?;
            Ok(tessellation::render_tessellation(&t, labels))
        }
        "cutoff" => {
            let p = DyadicPartition::parse(rest.ok_or("Parse: cutoff needs a partition")?)?;
            Ok(tessellation::render_cutoff(&Cutoff::from_partition(&p)))
        }
        "diagram" => Ok(tessellation::render_diagram(&element(
            rest.ok_or("Parse: diagram needs an element")?,
        )?)),
        _ => Ok(tessellation::render_diagram(&element(object)?)),
    }
}

fn render(object: &str, out: &PathBuf, labels: bool) -> Res<Output> {
    let svg = render_object(object, labels)?;
    std::fs::write(out, &svg).map_err(|e| format!("Io: {}: {e}", out.display()))?;
    Ok(Output::ok(
        format!("wrote {} ({} bytes)", out.display(), svg.len()),
        json!({ "object": object, "path": out.display().to_string(), "bytes": svg.len() }),
    ))
}

fn dispatch(cmd: &Command) -> Res<Output> {
    match cmd {
        Command::VerifyTensor { tensor } => verify_tensor(tensor),
        Command::Compose { f, g } => Ok(diagram_output(&thompson::compose(
            &element(f)?,
            &element(g)?,
        ))),
        Command::Reduce { f } => Ok(diagram_output(&thompson::reduce(&element(f)?))),
        Command::Eval { f, x } => {
            let x: DyadicRational = x.parse()?;
            let y = thompson::eval(&element(f)?, &x);
            Ok(Output::ok(
                y.to_string(),
                json!({ "x": x.to_string(), "y": y.to_string() }),
            ))
        }
        Command::MatrixElement {
            word,
            tensor,
            route,
        } => matrix_element(word, tensor, *route),
        Command::Approximate { map, level } => approximate(map, *level),
        Command::Flips { word, depth } => flips(word, *depth),
        Command::BtzEntropy { halfwidth, tensor } => btz_entropy(*halfwidth, tensor),
        Command::Render {
            object,
            out,
            labels,
        } => render(object, out, *labels),
    }
}

/// Runs the command line and returns the exit code, writing to the given
/// streams.
pub fn run_with(
    argv: &[String],
    stdout: &mut dyn std::io::Write,
    stderr: &mut dyn std::io::Write,
) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let sink: &mut dyn std::io::Write = if code == 0 { stdout } else { stderr };
            let _ = write!(sink, "{text}");
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(out) => {
            let _ = if cli.json {
                writeln!(
                    stdout,
                    "{}",
                    serde_json::to_string_pretty(&out.json).expect("json")
                )
            } else {
                writeln!(stdout, "{}", out.text)
            };
            out.code
        }
        Err(e) => {
            let _ = if cli.json {
                writeln!(stdout, "{}", json!({ "error": e.to_string() }))
            } else {
                writeln!(stderr, "error: {e}")
            };
            1
        }
    }
}

pub fn run(argv: Vec<String>) -> i32 {
    run_with(&argv, &mut std::io::stdout(), &mut std::io::stderr())
}
