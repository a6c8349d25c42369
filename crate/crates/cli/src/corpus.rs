use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use lockbreak::attack::{attack, score_guess, verify_key, Mode, Reference};
use lockbreak::key::{key_to_string, parse_key};
use lockbreak::locking::{choose_protected_inputs, lock, LockSpec, LockedBundle, Scheme};
use lockbreak::netlist::library::{self, Profile};
use lockbreak::netlist::{write_bench, write_bench_with_header, Circuit, DEFAULT_KEY_PREFIX};
use lockbreak::oracle::OracleHandle;

use crate::commands::{attack_config, parse_mode, read_bench, usage};
use crate::{CorpusArgs, Failure, Format, Outcome, ReportArgs};

/// Ground truth for one locked bench file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct Manifest {
    pub file: String,
    pub original: String,
    pub scheme: Scheme,
    /// `k_n..k_1`.
    pub key: String,
    pub protected_pattern: Option<String>,
    pub target_output: String,
    pub pairing: Vec<usize>,
    pub spec: LockSpec,
}

impl Manifest {
    pub fn new(b: &LockedBundle, file: String, original: String) -> Manifest {
        Manifest {
            file,
            original,
            scheme: b.spec.scheme,
            key: key_to_string(&b.spec.secret_key),
            protected_pattern: b.protected_pattern_string(),
            target_output: b.target_output.clone(),
            pairing: b.pairing.clone(),
            spec: b.spec.clone(),
        }
    }

    fn bundle(&self, dir: &Path) -> Result<LockedBundle, Failure> {
        let pattern = self
            .protected_pattern
            .as_deref()
            .map(parse_key)
            .transpose()
            .map_err(|e| usage(format!("{}: {e}", self.file)))?;
        Ok(LockedBundle {
            locked: read_bench(&dir.join(&self.file), DEFAULT_KEY_PREFIX)?,
            original: read_bench(&dir.join(&self.original), DEFAULT_KEY_PREFIX)?,
            spec: self.spec.clone(),
            target_output: self.target_output.clone(),
            pairing: self.pairing.clone(),
            protected_pattern: pattern,
        })
    }
}

const PROFILES: [Profile; 4] = [
    library::C432_SCALE,
    library::C880_SCALE,
    library::C1355_SCALE,
    library::SMALL24,
];

fn circuit(name: &str, seed: u64) -> Result<Circuit, Failure> {
    match name {
        "majority" => Ok(library::majority()),
        "c17" => Ok(library::c17()),
        _ => PROFILES
            .iter()
            .find(|p| p.name == name)
            .map(|p| library::synthetic(*p, seed))
            .ok_or_else(|| usage(format!("unknown circuit `{name}`"))),
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n.max(1));
    }
    Ok(b.build().context("thread pool")?)
}

struct Job {
    circuit: String,
    scheme: Scheme,
    width: usize,
    seed: u64,
}

impl Job {
    fn id(&self) -> String {
        format!(
            "{}_{}_k{}_s{}",
            self.circuit,
            self.scheme.name().to_ascii_lowercase(),
            self.width,
            self.seed
        )
    }

    fn build(&self) -> Result<LockedBundle, Failure> {
        let c = circuit(&self.circuit, self.seed)?;
        let n = self.width / self.scheme.keys_per_input();
        let prot = choose_protected_inputs(&c, n, self.seed)
            .map_err(|e| usage(format!("{}: {e}", self.id())))?;
        let b = lock(&c, &LockSpec::random(self.scheme, prot, self.seed))
            .map_err(|e| usage(format!("{}: {e}", self.id())))?;
        Ok(b.randomized(self.seed))
    }
}

pub(crate) fn corpus(a: CorpusArgs) -> Outcome {
    let schemes: Vec<Scheme> = a
        .schemes
        .iter()
        .map(|s| s.parse().map_err(usage))
        .collect::<Result<_, _>>()?;
    let mut jobs = Vec::new();
    for c in &a.circuits {
        circuit(c, 0)?;
        for &scheme in &schemes {
            for &width in &a.key_bits {
                if width == 0 || width % scheme.keys_per_input() != 0 {
                    return Err(usage(format!("{scheme} cannot take {width} key bits")));
                }
                for s in 0..a.seeds {
                    jobs.push(Job {
                        circuit: c.clone(),
                        scheme,
                        width,
                        seed: a.seed * 1000 + s,
                    });
                }
            }
        }
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let out = &a.out;
    let results: Vec<Result<(Manifest, bool), Failure>> = pool(a.workers)?.install(|| {
        jobs.par_iter()
            .map(|j| {
                let b = j.build()?;
                let id = j.id();
                let (file, orig) = (format!("{id}.bench"), format!("{id}.orig.bench"));
                std::fs::write(
                    out.join(&file),
                    write_bench_with_header(&b.locked, &b.header()),
                )
                .with_context(|| format!("writing {file}"))?;
                std::fs::write(out.join(&orig), write_bench(&b.original))
                    .with_context(|| format!("writing {orig}"))?;
                let key = b
                    .key_names()
                    .into_iter()
                    .zip(
                        b.spec
                            .secret_key
                            .iter()
                            .map(|&v| lockbreak::netlist::Tri::from_bool(v)),
                    )
                    .collect();
                let ok = verify_key(&b.locked, &key, Reference::Original(&b.original))
                    .map_err(|e| Failure::Internal(e.into()))?;
                Ok((Manifest::new(&b, file, orig), ok))
            })
            .collect()
    });
    let mut manifests = Vec::new();
    let mut bad = Vec::new();
    for r in results {
        let (m, ok) = r?;
        if !ok {
            bad.push(m.file.clone());
        }
        manifests.push(m);
    }
    let json = serde_json::to_string_pretty(&manifests).context("manifest")?;
    std::fs::write(out.join("manifest.json"), json + "\n").context("writing manifest.json")?;
    println!("{} bundles written to {}", manifests.len(), out.display());
    if !bad.is_empty() {
        return Err(Failure::Internal(anyhow!(
            "secret key fails self-check: {}",
            bad.join(", ")
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Row {
    file: String,
    scheme: Scheme,
    key_bits: usize,
    success: bool,
    cdk: usize,
    dk: usize,
    oracle_queries: u64,
    total_ms: f64,
    error: Option<String>,
}

#[derive(Debug, Default, Serialize)]
struct Summary {
    bundles: usize,
    success: usize,
    key_bits: usize,
    dk: usize,
    cdk: usize,
    total_ms: f64,
}

pub(crate) fn report(a: ReportArgs) -> Outcome {
    let mode = parse_mode(&a.mode)?;
    let path = a.corpus.join("manifest.json");
    let text =
        std::fs::read_to_string(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let manifests: Vec<Manifest> =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(d) = &a.out {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let cfg = attack_config(mode, a.qbf_timeout, a.sat_timeout, a.pi_fill, 0);
    let rows: Vec<Result<Row, Failure>> = pool(a.workers)?.install(|| {
        manifests
            .par_iter()
            .map(|m| {
                let b = m.bundle(&a.corpus)?;
                let mut oracle = OracleHandle::simulated(&b.original);
                let t = Instant::now();
                let res = attack(&b.locked, &cfg, (mode == Mode::Og).then_some(&mut oracle));
                let ms = t.elapsed().as_secs_f64() * 1e3;
                let mut row = Row {
                    file: m.file.clone(),
                    scheme: m.scheme,
                    key_bits: m.spec.key_width,
                    success: false,
                    cdk: 0,
                    dk: 0,
                    oracle_queries: 0,
                    total_ms: ms,
                    error: None,
                };
                match res {
                    Ok(r) => {
                        row.success = r.full_key().is_some()
                            && verify_key(&b.locked, &r.key_bits, Reference::Original(&b.original))
                                .unwrap_or(false);
                        (row.cdk, row.dk) = score_guess(&b, &r.key_bits);
                        row.oracle_queries = r.oracle_queries;
                        if let Some(d) = &a.out {
                            let f = d.join(Path::new(&m.file).with_extension("json"));
                            std::fs::write(&f, r.to_json() + "\n")
                                .with_context(|| format!("writing {}", f.display()))?;
                        }
                    }
                    Err(e) => row.error = Some(e.to_string()),
                }
                Ok(row)
            })
            .collect()
    });
    let rows: Vec<Row> = rows.into_iter().collect::<Result<_, _>>()?;
    let mut per: BTreeMap<Scheme, Summary> = BTreeMap::new();
    for r in &rows {
        let s = per.entry(r.scheme).or_default();
        s.bundles += 1;
        s.success += r.success as usize;
        s.key_bits += r.key_bits;
        s.dk += r.dk;
        s.cdk += r.cdk;
        s.total_ms += r.total_ms;
    }
    match a.format {
        Format::Json => {
            let v = serde_json::json!({ "mode": mode, "bundles": rows, "schemes": per });
            println!("{}", serde_json::to_string_pretty(&v).context("summary")?);
        }
        Format::Text => {
            println!(
                "{:<12} {:>7} {:>7} {:>8} {:>8} {:>8} {:>10}",
                "scheme", "bundles", "success", "bits", "dk", "cdk", "mean ms"
            );
            for (scheme, s) in &per {
                println!(
                    "{:<12} {:>7} {:>7} {:>8} {:>8} {:>8} {:>10.1}",
                    scheme.name(),
                    s.bundles,
                    s.success,
                    s.key_bits,
                    s.dk,
                    s.cdk,
                    s.total_ms / s.bundles as f64
                );
            }
            for r in rows.iter().filter(|r| r.error.is_some()) {
                println!("{}: {}", r.file, r.error.as_deref().unwrap_or_default());
            }
        }
    }
    Ok(())
}
