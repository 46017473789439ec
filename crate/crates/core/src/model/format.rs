//! Line-delimited text encoding of [`PosteriorDraws`].
//!
//! Fields are tab separated. Floats use Rust's shortest round-trip form, so
//! parsing a written file reproduces every value bit for bit.
//!
//! ```text
//! #bnp-claims-draws v1
//! meta  family=<poisson-frequency|normal-severity>  process=<dp|py>  n0=  a=  b=
//!       alpha_shape=  alpha_rate=  strength_mu=  strength_sigma=  iterations=
//!       burn_in=  thinning=  seed=  aux=  accept_phi=  accept_discount=  accept_strength=
//! draw     <iteration> <alpha> <discount> <K> <c_1,c_2,...,c_n> <loglik>
//! cluster  <label> <size> <param_1> ... <param_p>        (K lines follow each draw)
//! ```
//!
//! The `meta` line is a single line; it is wrapped above for width. Frequency
//! clusters list β₀…β_k; severity clusters list β₀…β_k then σ². Acceptance
//! rates that do not apply are written as `NA`.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::state::{AcceptanceRates, DrawsMeta};
use super::{ClusterState, ComponentParams, GammaPrior, LogNormalPrior, ModelSpec};
use super::{PosteriorDraws, SavedState};

pub const HEADER: &str = "#bnp-claims-draws v1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn perr(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:?}"))
}

pub fn write_draws<P: ComponentParams, W: Write>(
    draws: &PosteriorDraws<P>,
    mut out: W,
) -> io::Result<()> {
    let m = &draws.meta;
    let s = &m.spec;
    writeln!(out, "{HEADER}")?;
    writeln!(
        out,
        "meta\tfamily={}\tprocess={}\tn0={:?}\ta={:?}\tb={:?}\talpha_shape={:?}\talpha_rate={:?}\tstrength_mu={:?}\tstrength_sigma={:?}\titerations={}\tburn_in={}\tthinning={}\tseed={}\taux={}\taccept_phi={}\taccept_discount={}\taccept_strength={}",
        s.family,
        s.process,
        s.n0,
        s.a,
        s.b,
        s.alpha_prior.shape,
        s.alpha_prior.rate,
        s.strength_prior.mu,
        s.strength_prior.sigma,
        m.iterations,
        m.burn_in,
        m.thinning,
        m.seed,
        m.aux_components,
        opt(m.acceptance.phi),
        opt(m.acceptance.discount),
        opt(m.acceptance.strength),
    )?;
    for d in &draws.draws {
        write_saved(d, &mut out)?;
    }
    out.flush()
}

fn write_saved<P: ComponentParams, W: Write>(d: &SavedState<P>, out: &mut W) -> io::Result<()> {
    let st = &d.state;
    let labels: Vec<String> = st.assignments().iter().map(|c| c.to_string()).collect();
    writeln!(
        out,
        "draw\t{}\t{:?}\t{:?}\t{}\t{}\t{:?}",
        d.iteration,
        st.alpha(),
        st.discount(),
        st.k(),
        labels.join(","),
        d.loglik
    )?;
    for (label, cl) in st.clusters() {
        write!(out, "cluster\t{label}\t{}", cl.size)?;
        for f in cl.params.to_fields() {
            write!(out, "\t{f:?}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn parse_f64(line: usize, s: &str) -> Result<f64, FormatError> {
    s.parse().map_err(|_| perr(line, format!("bad number '{s}'")))
}

fn parse_usize(line: usize, s: &str) -> Result<usize, FormatError> {
    s.parse().map_err(|_| perr(line, format!("bad integer '{s}'")))
}

fn parse_meta(line: usize, fields: &[&str]) -> Result<DrawsMeta, FormatError> {
    let kv: BTreeMap<&str, &str> = fields
        .iter()
        .map(|f| f.split_once('=').ok_or_else(|| perr(line, format!("expected key=value, got '{f}'"))))
        .collect::<Result<_, _>>()?;
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| perr(line, format!("missing meta key '{k}'")));
    let f = |k: &str| get(k).and_then(|v| parse_f64(line, v));
    let u = |k: &str| get(k).and_then(|v| parse_usize(line, v));
    let o = |k: &str| -> Result<Option<f64>, FormatError> {
        match get(k)? {
            "NA" => Ok(None),
            v => parse_f64(line, v).map(Some),
        }
    };
    let spec = ModelSpec {
        family: get("family")?.parse().map_err(|e: String| perr(line, e))?,
        process: get("process")?.parse().map_err(|e: String| perr(line, e))?,
        n0: f("n0")?,
        a: f("a")?,
        b: f("b")?,
        alpha_prior: GammaPrior { shape: f("alpha_shape")?, rate: f("alpha_rate")? },
        strength_prior: LogNormalPrior { mu: f("strength_mu")?, sigma: f("strength_sigma")? },
    };
    Ok(DrawsMeta {
        spec,
        iterations: u("iterations")?,
        burn_in: u("burn_in")?,
        thinning: u("thinning")?,
        seed: get("seed")?.parse().map_err(|_| perr(line, "bad seed"))?,
        aux_components: u("aux")?,
        acceptance: AcceptanceRates {
            phi: o("accept_phi")?,
            discount: o("accept_discount")?,
            strength: o("accept_strength")?,
        },
    })
}

/// A draw record waiting for its cluster records: line, iteration, α, d, K, labels, loglik.
type PendingDraw = (usize, usize, f64, f64, usize, Vec<usize>, f64);

fn finish<P: ComponentParams>(
    pending: &mut Option<PendingDraw>,
    params: &mut BTreeMap<usize, P>,
    draws: &mut Vec<SavedState<P>>,
) -> Result<(), FormatError> {
    if let Some((line, iteration, alpha, discount, k, assignments, loglik)) = pending.take() {
        if params.len() != k {
            return Err(perr(line, format!("draw declares K={k} but has {} clusters", params.len())));
        }
        let state = ClusterState::from_assignments(assignments, std::mem::take(params), alpha, discount)
            .map_err(|e| perr(line, e.to_string()))?;
        if state.k() != k {
            return Err(perr(line, "cluster records do not match assignments"));
        }
        draws.push(SavedState { iteration, loglik, state });
    }
    Ok(())
}

pub fn read_draws<P: ComponentParams, R: BufRead>(input: R) -> Result<PosteriorDraws<P>, FormatError> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, Ok(h))) if h.trim_end() == HEADER => {}
        Some((n, Ok(_))) => return Err(perr(n, "missing draws header")),
        Some((_, Err(e))) => return Err(e.into()),
        None => return Err(perr(1, "empty draws file")),
    }
    let mut meta = None;
    let mut draws: Vec<SavedState<P>> = Vec::new();
    let mut pending: Option<PendingDraw> = None;
    let mut params: BTreeMap<usize, P> = BTreeMap::new();


    for (n, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[0] {
            "meta" => meta = Some(parse_meta(n, &fields[1..])?),
            "draw" => {
                finish(&mut pending, &mut params, &mut draws)?;
                if fields.len() != 7 {
                    return Err(perr(n, "draw record needs 6 fields"));
                }
                let assignments = if fields[5].is_empty() {
                    Vec::new()
                } else {
                    fields[5].split(',').map(|c| parse_usize(n, c)).collect::<Result<_, _>>()?
                };
                pending = Some((
                    n,
                    parse_usize(n, fields[1])?,
                    parse_f64(n, fields[2])?,
                    parse_f64(n, fields[3])?,
                    parse_usize(n, fields[4])?,
                    assignments,
                    parse_f64(n, fields[6])?,
                ));
            }
            "cluster" => {
                if pending.is_none() {
                    return Err(perr(n, "cluster record before any draw"));
                }
                if fields.len() < 3 {
                    return Err(perr(n, "cluster record needs label and size"));
                }
                let label = parse_usize(n, fields[1])?;
                let _size = parse_usize(n, fields[2])?;
                let values: Vec<f64> =
                    fields[3..].iter().map(|v| parse_f64(n, v)).collect::<Result<_, _>>()?;
                let p = P::from_fields(&values).map_err(|e| perr(n, e))?;
                if params.insert(label, p).is_some() {
                    return Err(perr(n, format!("duplicate cluster label {label}")));
                }
            }
            other => return Err(perr(n, format!("unknown record type '{other}'"))),
        }
    }
    finish(&mut pending, &mut params, &mut draws)?;
    let meta = meta.ok_or_else(|| perr(1, "missing meta record"))?;
    Ok(PosteriorDraws { meta, draws })
}

/// Reads only the model spec from a draws file, to pick the parameter type.
pub fn peek_spec<R: BufRead>(input: R) -> Result<ModelSpec, FormatError> {
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if let Some(rest) = line.strip_prefix("meta\t") {
            let fields: Vec<&str> = rest.split('\t').collect();
            return Ok(parse_meta(i + 1, &fields)?.spec);
        }
    }
    Err(perr(1, "missing meta record"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FreqParams, Process, SevParams};
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn meta(spec: ModelSpec) -> DrawsMeta {
        DrawsMeta {
            spec,
            iterations: 10,
            burn_in: 4,
            thinning: 2,
            seed: 99,
            aux_components: 3,
            acceptance: AcceptanceRates { phi: Some(0.8), discount: None, strength: Some(0.1 + 0.2) },
        }
    }

    fn arb_sev_state() -> impl Strategy<Value = ClusterState<SevParams>> {
        (
            prop::collection::vec(0usize..5, 1..12),
            prop::collection::vec((-1e3f64..1e3, -1e-3f64..1e-3, 1e-9f64..1e9), 5),
            0.01f64..20.0,
            0.0f64..0.99,
        )
            .prop_map(|(labels, ps, alpha, d)| {
                let params = labels
                    .iter()
                    .map(|&l| {
                        let (b0, b1, s2) = ps[l];
                        (l, SevParams { beta: DVector::from_vec(vec![b0, b1]), sigma2: s2 })
                    })
                    .collect();
                ClusterState::from_assignments(labels, params, alpha, d).unwrap()
            })
    }

    proptest! {
        #[test]
        fn severity_draws_round_trip(states in prop::collection::vec(arb_sev_state(), 0..5), ll in -1e6f64..0.0) {
            let draws = PosteriorDraws {
                meta: meta(ModelSpec::severity(Process::PitmanYor)),
                draws: states
                    .into_iter()
                    .enumerate()
                    .map(|(i, state)| SavedState { iteration: i * 2 + 5, loglik: ll / (i + 1) as f64, state })
                    .collect(),
            };
            let mut buf = Vec::new();
            write_draws(&draws, &mut buf).unwrap();
            let back: PosteriorDraws<SevParams> = read_draws(&buf[..]).unwrap();
            prop_assert_eq!(back, draws);
        }
    }

    #[test]
    fn frequency_round_trip_and_peek() {
        let params = [(2, FreqParams { beta: DVector::from_vec(vec![0.1, -3e-12]) })].into_iter().collect();
        let state = ClusterState::from_assignments(vec![2, 2, 2], params, 0.7, 0.0).unwrap();
        let draws = PosteriorDraws {
            meta: meta(ModelSpec::frequency(Process::Dirichlet)),
            draws: vec![SavedState { iteration: 6, loglik: -12.5, state }],
        };
        let mut buf = Vec::new();
        write_draws(&draws, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("draw\t6\t0.7\t0.0\t1\t2,2,2\t-12.5\n"));
        assert!(text.contains("cluster\t2\t3\t0.1\t-3e-12\n"));
        let back: PosteriorDraws<FreqParams> = read_draws(&buf[..]).unwrap();
        assert_eq!(back, draws);
        assert_eq!(peek_spec(&buf[..]).unwrap(), draws.meta.spec);
    }

    #[test]
    fn malformed_files_report_lines() {
        let bad = format!("{HEADER}\ndraw\t1\t1.0\t0.0\t2\t0,1\t-1.0\ncluster\t0\t1\t0.5\n");
        let err = read_draws::<FreqParams, _>(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = read_draws::<FreqParams, _>("nope\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("header"));
    }
}
