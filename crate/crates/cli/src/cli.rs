//! The `rdm` command line.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rdm_core::deck::SlideDeckRequest;
use rdm_core::extract::fixtures::{demo_metadata, demo_vendor_a, write_vendor_file};
use rdm_core::extract::VendorFormat;
use rdm_core::graph::{export_dot, export_json, Direction};
use rdm_core::model::{PermId, Properties, VocabularyTerm};
use rdm_core::previews::{demo_ebsd_map, write_ang};
use rdm_core::workflows::{demo_load_rows, executed_count, write_geometry_csv, write_load_csv, JobOutcome};
use rdm_core::Error;

use crate::config::ApiConfig;
use crate::error::{EXIT_DOMAIN, EXIT_OK, EXIT_USAGE};
use crate::service::{CreateObject, FormatChoice, GraphQuery, Ingest, LinkRequest, Service};

#[derive(Debug, Parser)]
#[command(name = "rdm", version, about = "Research data repository for materials science")]
pub struct Cli {
    /// Journal file holding the repository state.
    #[arg(long, global = true, env = "RDM_JOURNAL", default_value = "rdm.journal")]
    pub journal: PathBuf,
    /// Directory of the content-addressed blob store.
    #[arg(long, global = true, env = "RDM_BLOBROOT", default_value = "blobs")]
    pub blob_root: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create the journal and blob store if absent.
    Init,
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Create, inspect and link objects.
    #[command(subcommand)]
    Object(ObjectCmd),
    /// Inspect or extend controlled vocabularies.
    #[command(subcommand)]
    Vocab(VocabCmd),
    /// Register a file as a dataset of an entry; prints the dataset id.
    Ingest(IngestArgs),
    /// Inspect registered datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Print the provenance graph around an object, or of samples holding an element.
    Graph(GraphArgs),
    /// Run automated analyses.
    #[command(subcommand)]
    Workflow(WorkflowCmd),
    /// Write a dataset's preview PNG.
    Preview(PreviewArgs),
    /// Build an HTML slide deck from datasets; prints the deck's dataset id.
    Deck(DeckArgs),
    /// Blob store maintenance.
    #[command(subcommand)]
    Store(StoreCmd),
    /// Write a set of demo input files.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Bearer token; required when binding a non-loopback address.
    #[arg(long, env = "RDM_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    /// Allow GET requests without a token.
    #[arg(long)]
    pub public_read: bool,
    /// Run a scheduler tick every N seconds.
    #[arg(long, value_name = "SECONDS")]
    pub scheduler_interval: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum ObjectCmd {
    /// Create an object; prints its perm id.
    Create {
        #[arg(long = "type")]
        type_name: String,
        #[arg(long)]
        space: String,
        /// JSON object, or `@path` to read one from a file.
        #[arg(long, default_value = "{}")]
        props: String,
        #[arg(long = "parent")]
        parents: Vec<PermId>,
    },
    Get { id: PermId },
    List {
        #[arg(long = "type")]
        type_name: Option<String>,
    },
    Link { parent: PermId, child: PermId },
    Audit { id: PermId },
    /// Print the QR payload of an object.
    Qr { id: PermId },
}

#[derive(Debug, Subcommand)]
pub enum VocabCmd {
    Show {
        name: String,
    },
    /// Add a term to a controlled vocabulary.
    Add {
        name: String,
        #[arg(long)]
        code: String,
        #[arg(long)]
        label: String,
        #[arg(long, default_value = "")]
        description: String,
    },
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub entry: PermId,
    /// `auto`, `vendorA`, `vendorB`, `vendorC` or `none`.
    #[arg(long, default_value = "auto")]
    pub format: FormatChoice,
    #[arg(long, default_value = "OTHER")]
    pub dataset_type: String,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCmd {
    Get {
        id: PermId,
    },
    List {
        #[arg(long)]
        entry: Option<PermId>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GraphFormat {
    Dot,
    Json,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long, conflicts_with = "element", required_unless_present = "element")]
    pub root: Option<PermId>,
    #[arg(long)]
    pub element: Option<String>,
    #[arg(long, default_value = "both")]
    pub direction: Direction,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_enum, default_value = "dot")]
    pub format: GraphFormat,
}

#[derive(Debug, Subcommand)]
pub enum WorkflowCmd {
    /// Run every eligible workflow once.
    Tick,
    #[command(subcommand)]
    Run(RunCmd),
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Debug, Subcommand)]
pub enum RunCmd {
    /// Stress-strain figures for a micromechanics entry.
    StressStrain {
        #[arg(long)]
        entry: PermId,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableFormat {
    Text,
    Html,
}

#[derive(Debug, Subcommand)]
pub enum ReportCmd {
    /// Preparation steps of a metallographic prep entry.
    Prep {
        #[arg(long)]
        entry: PermId,
        #[arg(long, value_enum, default_value = "text")]
        format: TableFormat,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    pub id: PermId,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Re-render from the stored file first.
    #[arg(long)]
    pub regenerate: bool,
}

#[derive(Debug, Args)]
pub struct DeckArgs {
    #[arg(long)]
    pub title: String,
    #[arg(required = true)]
    pub ids: Vec<PermId>,
    #[arg(long)]
    pub owner: Option<PermId>,
    /// Also write the HTML here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum StoreCmd {
    /// Verify every referenced blob; fails if any is missing or corrupt.
    Check,
    /// Delete unreferenced blobs.
    Gc,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Normal output goes to `out`, diagnostics to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                let _ = e.print();
                EXIT_USAGE
            } else {
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: [{}] {e}", e.code().as_str());
            EXIT_DOMAIN
        }
    }
}

fn write_out(out: &mut dyn Write, bytes: &[u8]) -> rdm_core::Result<()> {
    out.write_all(bytes).map_err(|e| Error::io("writing output", e))
}

fn println(out: &mut dyn Write, line: impl std::fmt::Display) -> rdm_core::Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("writing output", e))
}

fn print_json<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> rdm_core::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::io("serializing output", std::io::Error::other(e)))?;
    println(out, text)
}

fn read_file(path: &Path) -> rdm_core::Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn write_file(path: &Path, bytes: &[u8]) -> rdm_core::Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn parse_props(text: &str) -> rdm_core::Result<Properties> {
    let owned;
    let json = match text.strip_prefix('@') {
        Some(path) => {
            owned = String::from_utf8(read_file(Path::new(path))?)
                .map_err(|_| Error::Encoding(format!("{path} is not UTF-8")))?;
            owned.as_str()
        }
        None => text,
    };
    serde_json::from_str(json).map_err(|e| Error::Parse(format!("--props must be a JSON object: {e}")))
}

fn print_outcome(out: &mut dyn Write, o: &JobOutcome) -> rdm_core::Result<()> {
    let produced: Vec<String> = o.produced_datasets.iter().map(PermId::to_string).collect();
    println(
        out,
        format!("{} {} {} [{}]", o.entry, o.workflow_name, o.reason, produced.join(" ")),
    )
}

fn execute(cli: Cli, out: &mut dyn Write) -> rdm_core::Result<()> {
    if let Command::Serve(args) = cli.command {
        return serve(cli.journal, cli.blob_root, args);
    }
    if let Command::Fixtures { out: dir } = &cli.command {
        return write_fixtures(dir, out);
    }
    let svc = Service::open(&cli.journal, &cli.blob_root)?;
    match cli.command {
        Command::Init => println(out, format!("initialized {}", cli.journal.display())),
        Command::Serve(_) | Command::Fixtures { .. } => unreachable!("handled above"),
        Command::Object(cmd) => match cmd {
            ObjectCmd::Create {
                type_name,
                space,
                props,
                parents,
            } => {
                let rec = svc.create_object(CreateObject {
                    type_name,
                    space,
                    properties: parse_props(&props)?,
                    parents,
                })?;
                println(out, &rec.perm_id)
            }
            ObjectCmd::Get { id } => print_json(out, &svc.get_object(&id)?),
            ObjectCmd::List { type_name } => {
                for o in svc.list_objects(type_name.as_deref()) {
                    println(out, format!("{}\t{}", o.perm_id, o.type_name))?;
                }
                Ok(())
            }
            ObjectCmd::Link { parent, child } => svc.link(&LinkRequest { parent, child }),
            ObjectCmd::Audit { id } => print_json(out, &svc.audit(&id)?),
            ObjectCmd::Qr { id } => println(out, svc.qr(&id)?.payload),
        },
        Command::Vocab(cmd) => match cmd {
            VocabCmd::Show { name } => print_json(out, &svc.vocabulary(&name)?),
            VocabCmd::Add {
                name,
                code,
                label,
                description,
            } => {
                let v = svc.extend_vocabulary(
                    &name,
                    VocabularyTerm {
                        code,
                        label,
                        description,
                    },
                )?;
                println(out, format!("{} now has {} terms", v.name, v.terms.len()))
            }
        },
        Command::Ingest(args) => {
            let bytes = read_file(&args.file)?;
            let filename = args
                .file
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "upload.bin".into());
            let d = svc.ingest(Ingest {
                entry: args.entry,
                bytes,
                filename,
                format: args.format,
                dataset_type: args.dataset_type,
            })?;
            for w in &d.warnings {
                eprintln!("warning: {w}");
            }
            println(out, &d.dataset_id)
        }
        Command::Dataset(cmd) => match cmd {
            DatasetCmd::Get { id } => print_json(out, &svc.get_dataset(&id)?),
            DatasetCmd::List { entry } => {
                for d in svc.list_datasets(entry.as_ref())? {
                    println(out, format!("{}\t{}\t{}", d.dataset_id, d.dataset_type, d.original_filename))?;
                }
                Ok(())
            }
        },
        Command::Graph(args) => {
            let g = svc.graph(&GraphQuery {
                root: args.root,
                direction: Some(args.direction),
                depth: args.depth,
                element: args.element,
            })?;
            match args.format {
                GraphFormat::Dot => write_out(out, export_dot(&g).as_bytes()),
                GraphFormat::Json => println(out, export_json(&g)),
            }
        }
        Command::Workflow(cmd) => match cmd {
            WorkflowCmd::Tick => {
                let outcomes = svc.tick()?;
                for o in &outcomes {
                    print_outcome(out, o)?;
                }
                println(out, format!("{} jobs executed", executed_count(&outcomes)))
            }
            WorkflowCmd::Run(RunCmd::StressStrain { entry, force }) => {
                let o = svc.stress_strain(&entry, force)?;
                print_outcome(out, &o)?;
                if o.is_failure() {
                    return Err(Error::Domain(o.reason));
                }
                Ok(())
            }
            WorkflowCmd::Report(ReportCmd::Prep { entry, format, force }) => {
                let (table, outcome) = svc.prep_report(&entry, force)?;
                if outcome.is_failure() {
                    return Err(Error::Domain(outcome.reason));
                }
                for w in &table.warnings {
                    eprintln!("warning: {w}");
                }
                match format {
                    TableFormat::Text => write_out(out, table.to_text().as_bytes()),
                    TableFormat::Html => write_out(out, table.to_html().as_bytes()),
                }
            }
        },
        Command::Preview(args) => {
            let png = if args.regenerate {
                svc.regenerate_preview(&args.id)?
            } else {
                svc.preview(&args.id)?
            };
            match args.out {
                Some(path) => write_file(&path, &png),
                None => write_out(out, &png),
            }
        }
        Command::Deck(args) => {
            let deck = svc.deck(&SlideDeckRequest {
                dataset_ids: args.ids,
                title: args.title,
                owner_entry: args.owner,
            })?;
            if let Some(path) = args.out {
                write_file(&path, &deck.html)?;
            }
            println(out, &deck.dataset.dataset_id)
        }
        Command::Store(StoreCmd::Check) => {
            let report = svc.check()?;
            print_json(out, &report)?;
            if report.ok() {
                Ok(())
            } else {
                Err(Error::Corrupt(format!(
                    "{} missing and {} corrupt blobs",
                    report.missing.len(),
                    report.corrupt.len()
                )))
            }
        }
        Command::Store(StoreCmd::Gc) => {
            let gc = svc.gc()?;
            println(out, format!("removed {} blobs ({} bytes)", gc.removed, gc.bytes_freed))
        }
    }
}

fn serve(journal: PathBuf, blob_root: PathBuf, args: ServeArgs) -> rdm_core::Result<()> {
    crate::logging::init();
    let config = ApiConfig {
        bind: args.bind,
        token: args.token,
        journal,
        blob_root,
        scheduler_interval: args.scheduler_interval.map(Duration::from_secs),
        public_read: args.public_read,
    };
    config.validate()?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("starting runtime", e))?;
    runtime.block_on(crate::api::serve(config))
}

/// Names of the files written by `rdm fixtures`.
pub const FIXTURE_FILES: [&str; 7] = [
    "sem_vendor_a.tif",
    "sem_vendor_b.emi",
    "sem_vendor_c.txt",
    "ebsd_map.ang",
    "MP1.csv",
    "MP2.csv",
    "pillars.csv",
];

/// Top diameter of pillar MP1 in µm. One millinewton on it gives a stress of
/// 4e-3 / (π 1e-12) Pa.
pub const FIXTURE_MP1_DIAMETER_UM: f64 = 1.0;

fn write_fixtures(dir: &Path, out: &mut dyn Write) -> rdm_core::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let meta = demo_metadata();
    let contents: [Vec<u8>; 7] = [
        demo_vendor_a(128, 96, 16),
        write_vendor_file(VendorFormat::VendorB, &meta),
        write_vendor_file(VendorFormat::VendorC, &meta),
        write_ang(&demo_ebsd_map(60, 40)).into_bytes(),
        write_load_csv(&demo_load_rows(60, 0.01, 1.5)).into_bytes(),
        write_load_csv(&demo_load_rows(60, 0.02, 2.5)).into_bytes(),
        write_geometry_csv(&[("MP1", FIXTURE_MP1_DIAMETER_UM, 2.0), ("MP2", 1.5, 3.0)]).into_bytes(),
    ];
    for (name, bytes) in FIXTURE_FILES.iter().zip(contents) {
        let path = dir.join(name);
        write_file(&path, &bytes)?;
        println(out, path.display())?;
    }
    Ok(())
}
