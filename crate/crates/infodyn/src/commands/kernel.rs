use std::path::Path;

use infodyn_core::kernel::{
    cut_bonds, validate_causality, Attribute, AttributeSet, Block, Bond, CausalDecomposition, CausalityReport,
    CauseEntry, SystemGraph, TimeBase,
};
use serde::{Deserialize, Serialize};

use crate::cli::{Context, KernelCheckArgs};
use crate::error::{CliError, CliResult};
use crate::io::{read_text, write_json};

/// System description: time base, attributes, ordered blocks, cause map,
/// information bonds and the bonds to cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default)]
    pub instants: Option<Vec<f64>>,
    #[serde(default)]
    pub n_instants: Option<usize>,
    pub attributes: Vec<Attribute>,
    #[serde(default)]
    pub blocks: Vec<BlockSpec>,
    #[serde(default)]
    pub causes: Vec<CauseEntry>,
    #[serde(default)]
    pub bonds: Vec<BondSpec>,
    #[serde(default)]
    pub couplings: Vec<[String; 2]>,
    #[serde(default)]
    pub cut: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub attributes: Vec<String>,
    /// Defaults to true when every attribute in the block is inertial.
    #[serde(default)]
    pub inertial: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BondSpec {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubSystemReport {
    pub attributes: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub internal: Vec<String>,
    pub bonds: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub ok: bool,
    pub instants: Vec<f64>,
    pub attributes: Vec<String>,
    pub causality: CausalityReport,
    pub cut: Vec<usize>,
    pub subsystems: Vec<SubSystemReport>,
}

/// Everything resolved from a [`KernelSpec`].
pub struct LoadedSystem {
    pub time: TimeBase,
    pub attributes: AttributeSet,
    pub decomposition: CausalDecomposition,
    pub graph: SystemGraph,
    pub cut: Vec<usize>,
}

pub fn load(path: &Path) -> CliResult<LoadedSystem> {
    let text = read_text(path)?;
    let field = path.display().to_string();
    let spec: KernelSpec = toml::from_str(&text).map_err(|e| CliError::validation(&field, e.message()))?;
    resolve(spec, &field)
}

pub fn resolve(spec: KernelSpec, field: &str) -> CliResult<LoadedSystem> {
    let bad = |msg: String| CliError::validation(field, msg);
    let time = match (spec.instants, spec.n_instants) {
        (Some(t), None) => TimeBase::new(t),
        (None, Some(n)) => TimeBase::ticks(n),
        _ => return Err(bad("give exactly one of `instants` or `n_instants`".into())),
    }
    .map_err(|e| bad(e.to_string()))?;
    let attributes = AttributeSet::new(spec.attributes).map_err(|e| bad(e.to_string()))?;
    let index = |name: &str| attributes.index_of(name).ok_or_else(|| bad(format!("unknown attribute `{name}`")));

    let mut blocks = Vec::with_capacity(spec.blocks.len());
    for b in &spec.blocks {
        let ids = b.attributes.iter().map(|n| index(n)).collect::<CliResult<Vec<_>>>()?;
        let inertial =
            b.inertial.unwrap_or_else(|| ids.iter().all(|&i| attributes.get(i).and_then(|a| a.inertial) == Some(true)));
        blocks.push(Block { attributes: ids, inertial });
    }
    let decomposition =
        CausalDecomposition { n_attributes: attributes.len(), n_instants: time.len(), blocks, causes: spec.causes };

    let bonds = spec
        .bonds
        .iter()
        .map(|b| Ok(Bond { source: index(&b.source)?, target: index(&b.target)? }))
        .collect::<CliResult<Vec<_>>>()?;
    let couplings = spec.couplings.iter().map(|[a, b]| Ok((index(a)?, index(b)?))).collect::<CliResult<Vec<_>>>()?;
    let graph = SystemGraph::new(attributes.len(), bonds, couplings).map_err(|e| bad(e.to_string()))?;
    if let Some(&b) = spec.cut.iter().find(|&&b| b >= graph.bonds().len()) {
        return Err(bad(format!("cut refers to bond {b}, only {} defined", graph.bonds().len())));
    }
    Ok(LoadedSystem { time, attributes, decomposition, graph, cut: spec.cut })
}

pub fn check(system: &LoadedSystem) -> CliResult<KernelReport> {
    let causality = validate_causality(&system.decomposition);
    let parts = cut_bonds(&system.graph, &system.cut).map_err(|e| CliError::runtime("cut_bonds", e))?;
    let names = |ids: &[usize]| -> Vec<String> {
        ids.iter().map(|&i| system.attributes.get(i).expect("validated").name.clone()).collect()
    };
    Ok(KernelReport {
        ok: causality.ok,
        instants: system.time.instants().to_vec(),
        attributes: system.attributes.iter().map(|a| a.name.clone()).collect(),
        cut: system.cut.clone(),
        subsystems: parts
            .iter()
            .map(|p| SubSystemReport {
                attributes: names(&p.attributes),
                inputs: names(&p.ports.inputs),
                outputs: names(&p.ports.outputs),
                internal: names(&p.ports.internal),
                bonds: p.bonds.clone(),
            })
            .collect(),
        causality,
    })
}

pub fn run(ctx: &Context, args: &KernelCheckArgs) -> CliResult<()> {
    let mut system = load(&args.input)?;
    if let Some(cut) = &args.cut {
        if let Some(&b) = cut.iter().find(|&&b| b >= system.graph.bonds().len()) {
            return Err(CliError::validation("--cut", format!("bond {b} does not exist")));
        }
        system.cut = cut.clone();
    }
    let report = check(&system)?;
    match &report.causality.violation {
        None => println!(
            "causality: ok ({} cells), {} sub-systems",
            report.causality.cells_checked,
            report.subsystems.len()
        ),
        Some(v) => println!("causality: violated ({v:?}), {} sub-systems", report.subsystems.len()),
    }
    #[derive(Serialize)]
    struct WithInput<'a> {
        input: String,
        #[serde(flatten)]
        report: &'a KernelReport,
    }
    write_json(
        &ctx.out_dir.join("kernel_report.json"),
        &WithInput { input: args.input.display().to_string(), report: &report },
    )
}
