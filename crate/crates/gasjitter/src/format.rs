//! Network files: TOML with `[gas]`, `[network]`, `[[nodes]]`, `[[pipes]]`,
//! `[[compressors]]` and `[noise]` sections. See the README for the grammar.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use gasjitter_core::units::{
    DEFAULT_ALPHA_MAX, DEFAULT_ALPHA_MIN, DEFAULT_COMPRESSOR_EXPONENT, DEFAULT_FRICTION,
    DEFAULT_NOISE_TAU, DEFAULT_SIGMA_FRACTION, DEFAULT_SOUND_SPEED,
};
use gasjitter_core::{CompressorSpec, End, GasProperties, Network, NetworkBuilder, Node, PipeSpec};
use serde::Deserialize;
use toml::Spanned;

use crate::quantity::{Dimension, Quantity};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("line {line}: `{field}`: {message}")]
    Value {
        line: usize,
        field: String,
        message: String,
    },

    #[error("line {line}: unknown {kind} `{name}`")]
    UnknownReference {
        line: usize,
        kind: &'static str,
        name: String,
    },

    #[error("line {line}: duplicate {kind} id `{name}`")]
    Duplicate {
        line: usize,
        kind: &'static str,
        name: String,
    },

    #[error(transparent)]
    Network(#[from] gasjitter_core::Error),
}

/// A parsed network plus notes about defaults that were filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub network: Network,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    gas: Option<GasSection>,
    network: NetworkSection,
    nodes: Vec<NodeEntry>,
    #[serde(default)]
    pipes: Vec<PipeEntry>,
    #[serde(default)]
    compressors: Vec<CompressorEntry>,
    noise: Option<NoiseSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GasSection {
    sound_speed: Option<Spanned<Quantity>>,
    friction: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSection {
    slack: Spanned<String>,
    slack_pressure: Spanned<Quantity>,
    mainline: Option<Spanned<Vec<String>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: Spanned<String>,
    injection: Spanned<Quantity>,
    p_min: Option<Spanned<Quantity>>,
    p_max: Option<Spanned<Quantity>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PipeEntry {
    id: Spanned<String>,
    from: Spanned<String>,
    to: Spanned<String>,
    length: Spanned<Quantity>,
    diameter: Spanned<Quantity>,
    friction: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompressorEntry {
    id: Spanned<String>,
    pipe: Spanned<String>,
    at: Spanned<String>,
    alpha_min: Option<f64>,
    alpha_max: Option<f64>,
    efficiency: Option<f64>,
    cost: Option<f64>,
    exponent: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    sigma_fraction: Option<f64>,
    tau: Option<Spanned<Quantity>>,
    #[serde(default)]
    nodes: Vec<NoiseEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseEntry {
    id: Spanned<String>,
    sigma: Option<Spanned<Quantity>>,
    tau: Option<Spanned<Quantity>>,
}

/// 1-based line and column of a byte offset.
pub(crate) fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

pub(crate) fn syntax_error(text: &str, err: &toml::de::Error) -> FormatError {
    let (line, column) = err.span().map_or((0, 0), |s| position(text, s.start));
    FormatError::Syntax {
        line,
        column,
        message: err.message().to_string(),
    }
}

pub(crate) struct Ctx<'a> {
    pub text: &'a str,
}

impl Ctx<'_> {
    pub fn line(&self, span: Range<usize>) -> usize {
        position(self.text, span.start).0
    }

    pub fn quantity(
        &self,
        q: &Spanned<Quantity>,
        field: &str,
        dim: Dimension,
    ) -> Result<f64, FormatError> {
        q.get_ref()
            .to_si(dim)
            .map_err(|message| FormatError::Value {
                line: self.line(q.span()),
                field: field.to_string(),
                message,
            })
    }
}

pub fn parse_network(text: &str) -> Result<Parsed, FormatError> {
    let file: File = toml::from_str(text).map_err(|e| syntax_error(text, &e))?;
    let ctx = Ctx { text };
    let mut warnings = Vec::new();

    let (sound_speed, friction) = match &file.gas {
        Some(g) => (
            g.sound_speed
                .as_ref()
                .map(|q| ctx.quantity(q, "sound_speed", Dimension::Speed))
                .transpose()?,
            g.friction,
        ),
        None => (None, None),
    };
    let sound_speed = sound_speed.unwrap_or_else(|| {
        warnings.push(format!(
            "[gas] sound_speed not given; using {DEFAULT_SOUND_SPEED} m/s"
        ));
        DEFAULT_SOUND_SPEED
    });
    let friction = friction.unwrap_or_else(|| {
        warnings.push(format!(
            "[gas] friction not given; using {DEFAULT_FRICTION}"
        ));
        DEFAULT_FRICTION
    });
    let gas = GasProperties::new(sound_speed, friction)?;

    let mut node_lines: HashMap<&str, usize> = HashMap::new();
    for n in &file.nodes {
        if node_lines
            .insert(n.id.get_ref(), ctx.line(n.id.span()))
            .is_some()
        {
            return Err(FormatError::Duplicate {
                line: ctx.line(n.id.span()),
                kind: "node",
                name: n.id.get_ref().clone(),
            });
        }
    }
    let node_ref = |s: &Spanned<String>| -> Result<(), FormatError> {
        if node_lines.contains_key(s.get_ref().as_str()) {
            Ok(())
        } else {
            Err(FormatError::UnknownReference {
                line: ctx.line(s.span()),
                kind: "node",
                name: s.get_ref().clone(),
            })
        }
    };
    let mut pipe_ends: HashMap<&str, (&str, &str)> = HashMap::new();
    for p in &file.pipes {
        node_ref(&p.from)?;
        node_ref(&p.to)?;
        if pipe_ends
            .insert(p.id.get_ref(), (p.from.get_ref(), p.to.get_ref()))
            .is_some()
        {
            return Err(FormatError::Duplicate {
                line: ctx.line(p.id.span()),
                kind: "pipe",
                name: p.id.get_ref().clone(),
            });
        }
    }
    for c in &file.compressors {
        let Some(&(from, to)) = pipe_ends.get(c.pipe.get_ref().as_str()) else {
            return Err(FormatError::UnknownReference {
                line: ctx.line(c.pipe.span()),
                kind: "pipe",
                name: c.pipe.get_ref().clone(),
            });
        };
        node_ref(&c.at)?;
        if c.at.get_ref() != from && c.at.get_ref() != to {
            return Err(FormatError::Value {
                line: ctx.line(c.at.span()),
                field: "at".into(),
                message: format!(
                    "node `{}` is not an end of pipe `{}`",
                    c.at.get_ref(),
                    c.pipe.get_ref()
                ),
            });
        }
    }
    node_ref(&file.network.slack)?;

    let (fraction, default_tau) = match &file.noise {
        Some(ns) => (
            ns.sigma_fraction,
            ns.tau
                .as_ref()
                .map(|q| ctx.quantity(q, "tau", Dimension::Time))
                .transpose()?,
        ),
        None => (None, None),
    };
    let fraction = fraction.unwrap_or(DEFAULT_SIGMA_FRACTION);
    let default_tau = default_tau.unwrap_or(DEFAULT_NOISE_TAU);
    let mut noise: HashMap<&str, (Option<f64>, Option<f64>)> = HashMap::new();
    if let Some(ns) = &file.noise {
        for e in &ns.nodes {
            node_ref(&e.id)?;
            let sigma = e
                .sigma
                .as_ref()
                .map(|q| ctx.quantity(q, "sigma", Dimension::MassFlow))
                .transpose()?;
            let tau = e
                .tau
                .as_ref()
                .map(|q| ctx.quantity(q, "tau", Dimension::Time))
                .transpose()?;
            noise.insert(e.id.get_ref(), (sigma, tau));
        }
    }

    let mut b = NetworkBuilder::new(gas);
    let mut defaulted_noise = 0;
    let mut unbounded = 0;
    for n in &file.nodes {
        let q = ctx.quantity(&n.injection, "injection", Dimension::MassFlow)?;
        let p_min = n
            .p_min
            .as_ref()
            .map(|v| ctx.quantity(v, "p_min", Dimension::Pressure))
            .transpose()?;
        let p_max = n
            .p_max
            .as_ref()
            .map(|v| ctx.quantity(v, "p_max", Dimension::Pressure))
            .transpose()?;
        if p_min.is_none() || p_max.is_none() {
            unbounded += 1;
        }
        let (sigma, tau) = noise
            .get(n.id.get_ref().as_str())
            .copied()
            .unwrap_or((None, None));
        if sigma.is_none() {
            defaulted_noise += 1;
        }
        let node = Node::new(n.id.get_ref().clone(), q)
            .with_bounds(p_min.unwrap_or(0.0), p_max.unwrap_or(f64::INFINITY))
            .with_noise(
                sigma.unwrap_or(fraction * q.abs()),
                tau.unwrap_or(default_tau),
            );
        b = b.node(node);
    }
    if unbounded > 0 {
        warnings.push(format!(
            "{unbounded} node(s) lack p_min or p_max; missing bounds are 0 Pa and unbounded above"
        ));
    }
    if defaulted_noise > 0 {
        warnings.push(format!(
            "{defaulted_noise} node(s) use the default noise sigma = {fraction} |q|, tau = {default_tau} s"
        ));
    }

    for p in &file.pipes {
        let length = ctx.quantity(&p.length, "length", Dimension::Length)?;
        let diameter = ctx.quantity(&p.diameter, "diameter", Dimension::Length)?;
        let mut spec = PipeSpec::new(
            p.id.get_ref().clone(),
            p.from.get_ref().clone(),
            p.to.get_ref().clone(),
            length,
            diameter,
        );
        if let Some(f) = p.friction {
            spec = spec.friction(f);
        }
        b = b.pipe(spec);
    }

    let mut defaulted_comp = 0;
    for c in &file.compressors {
        if c.alpha_min.is_none()
            || c.alpha_max.is_none()
            || c.efficiency.is_none()
            || c.cost.is_none()
            || c.exponent.is_none()
        {
            defaulted_comp += 1;
        }
        let base = CompressorSpec::new(
            c.id.get_ref().clone(),
            c.pipe.get_ref().clone(),
            c.at.get_ref().clone(),
        );
        let spec = base
            .clone()
            .ratio_bounds(
                c.alpha_min.unwrap_or(DEFAULT_ALPHA_MIN),
                c.alpha_max.unwrap_or(DEFAULT_ALPHA_MAX),
            )
            .efficiency(c.efficiency.unwrap_or(base.efficiency))
            .cost(c.cost.unwrap_or(base.cost))
            .exponent(c.exponent.unwrap_or(DEFAULT_COMPRESSOR_EXPONENT));
        b = b.compressor(spec);
    }
    if defaulted_comp > 0 {
        warnings.push(format!(
            "{defaulted_comp} compressor(s) use defaults for some of alpha_min = {DEFAULT_ALPHA_MIN}, \
             alpha_max = {DEFAULT_ALPHA_MAX}, efficiency = 1, cost = 1, exponent = 2/7"
        ));
    }

    let slack_p = ctx.quantity(
        &file.network.slack_pressure,
        "slack_pressure",
        Dimension::Pressure,
    )?;
    b = b.slack(file.network.slack.get_ref().clone(), slack_p);
    if let Some(m) = &file.network.mainline {
        let ends = m.get_ref();
        if ends.len() != 2 {
            return Err(FormatError::Value {
                line: ctx.line(m.span()),
                field: "mainline".into(),
                message: format!("expected [start, end], got {} names", ends.len()),
            });
        }
        for name in ends {
            if !node_lines.contains_key(name.as_str()) {
                return Err(FormatError::UnknownReference {
                    line: ctx.line(m.span()),
                    kind: "node",
                    name: name.clone(),
                });
            }
        }
        b = b.mainline(ends[0].clone(), ends[1].clone());
    }
    let network = b.build()?;
    warnings.extend(network.warnings());
    Ok(Parsed { network, warnings })
}

pub fn read_network(path: &Path) -> Result<Parsed, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_network(&text)
}

fn quote(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        // Debug prints the shortest string that reads back exactly.
        format!("{v:?}")
    }
}

/// Every value written out in SI, defaults included, so that reading the
/// result back gives an identical network.
pub fn serialize_network(net: &Network) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# gasjitter network; numbers are SI (Pa, m, kg/s, s, m/s)\n"
    );
    let gas = net.gas();
    let _ = writeln!(
        s,
        "[gas]\nsound_speed = {}\nfriction = {}\n",
        num(gas.sound_speed),
        num(gas.friction)
    );
    let _ = writeln!(s, "[network]");
    let _ = writeln!(s, "slack = {}", quote(&net.node(net.slack()).id));
    let _ = writeln!(s, "slack_pressure = {}", num(net.slack_pressure()));
    if let Some((a, b)) = net.mainline() {
        let _ = writeln!(
            s,
            "mainline = [{}, {}]",
            quote(&net.node(a).id),
            quote(&net.node(b).id)
        );
    }
    for n in net.nodes() {
        let _ = writeln!(
            s,
            "\n[[nodes]]\nid = {}\ninjection = {}\np_min = {}\np_max = {}",
            quote(&n.id),
            num(n.injection),
            num(n.p_min),
            num(n.p_max)
        );
    }
    for p in net.pipes() {
        let _ = writeln!(
            s,
            "\n[[pipes]]\nid = {}\nfrom = {}\nto = {}\nlength = {}\ndiameter = {}",
            quote(&p.id),
            quote(&net.node(p.from).id),
            quote(&net.node(p.to).id),
            num(p.length),
            num(p.diameter)
        );
        if let Some(f) = p.friction {
            let _ = writeln!(s, "friction = {}", num(f));
        }
    }
    for c in net.compressors() {
        let pipe = net.pipe(c.pipe);
        let at = if c.at == End::From {
            pipe.from
        } else {
            pipe.to
        };
        let _ = writeln!(
            s,
            "\n[[compressors]]\nid = {}\npipe = {}\nat = {}\nalpha_min = {}\nalpha_max = {}\nefficiency = {}\ncost = {}\nexponent = {}",
            quote(&c.id),
            quote(&pipe.id),
            quote(&net.node(at).id),
            num(c.alpha_min),
            num(c.alpha_max),
            num(c.efficiency),
            num(c.cost),
            num(c.exponent)
        );
    }
    let _ = writeln!(
        s,
        "\n[noise]\nsigma_fraction = {}\ntau = {}",
        num(DEFAULT_SIGMA_FRACTION),
        num(DEFAULT_NOISE_TAU)
    );
    for n in net.nodes() {
        let _ = writeln!(
            s,
            "\n[[noise.nodes]]\nid = {}\nsigma = {}\ntau = {}",
            quote(&n.id),
            num(n.noise_sigma),
            num(n.noise_tau)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[gas]
sound_speed = "370 m/s"
friction = 0.01

[network]
slack = "W"
slack_pressure = "800 psi"
mainline = ["W", "E"]

[[nodes]]
id = "W"
injection = "20 kg/s"
p_min = "500 psi"
p_max = "800 psi"

[[nodes]]
id = "E"
injection = -20.0
p_min = "500 psi"
p_max = "800 psi"

[[pipes]]
id = "W-E"
from = "W"
to = "E"
length = "62 mi"
diameter = "36 in"

[[compressors]]
id = "K"
pipe = "W-E"
at = "W"
alpha_max = 1.4
"#;

    #[test]
    fn reads_field_units() {
        let parsed = parse_network(SMALL).unwrap();
        let net = &parsed.network;
        assert_eq!(net.pipes()[0].length, 62.0 * gasjitter_core::units::MILE);
        assert_eq!(net.pipes()[0].diameter, 36.0 * gasjitter_core::units::INCH);
        assert_eq!(net.slack_pressure(), 800.0 * gasjitter_core::units::PSI);
        assert_eq!(net.compressors()[0].alpha_max, 1.4);
        assert!(parsed.warnings.iter().any(|w| w.contains("compressor")));
        assert!(parsed.warnings.iter().any(|w| w.contains("default noise")));
    }

    fn line_containing(text: &str, needle: &str) -> usize {
        text.lines().position(|l| l.contains(needle)).unwrap() + 1
    }

    #[test]
    fn unknown_node_reports_its_line() {
        let text = SMALL.replace("to = \"E\"", "to = \"X\"");
        match parse_network(&text).unwrap_err() {
            FormatError::UnknownReference { line, kind, name } => {
                assert_eq!(
                    (line, kind, name.as_str()),
                    (line_containing(&text, "to = \"X\""), "node", "X")
                );
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn bad_unit_reports_its_line() {
        let text = SMALL.replace("\"36 in\"", "\"36 psi\"");
        let want = line_containing(&text, "36 psi");
        let err = parse_network(&text).unwrap_err();
        assert!(
            matches!(err, FormatError::Value { line, .. } if line == want),
            "{err}"
        );
    }

    #[test]
    fn syntax_error_has_a_position() {
        let err = parse_network("[gas\nfriction = 1").unwrap_err();
        assert!(matches!(err, FormatError::Syntax { line: 1, .. }), "{err}");
    }

    #[test]
    fn serialized_network_reads_back_identically() {
        let net = parse_network(SMALL).unwrap().network;
        let again = parse_network(&serialize_network(&net)).unwrap();
        assert_eq!(again.network, net);
        assert!(again.warnings.is_empty(), "{:?}", again.warnings);
    }
}
