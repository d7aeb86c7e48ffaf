use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use restbench_core::llm::{TemplateName, TemplateStore};
use restbench_core::metrics::{render_table, ApiRow, MetricInputs, MetricRegistry};
use restbench_core::spec_model::load_spec;
use restbench_core::workflow::Project;
use restbench_server::config::ServerConfig;
use restbench_server::http::router;
use restbench_server::service::Service;
use restbench_testkit::{FaultPlan, SampleService};

#[derive(Parser)]
#[command(name = "restbench", version, about = "Workbench for LLM-assisted REST API testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
        /// Answer prompts from this routing table instead of a model.
        #[arg(long)]
        scripted: Option<PathBuf>,
    },
    /// Parse a spec and print its operations.
    Parse { source: String },
    /// Print the prompt template store.
    Templates,
    /// Render one template with bindings read from a JSON object file.
    Prompt {
        /// Store key, e.g. `generate_test_case_prompt`.
        template: String,
        #[arg(long)]
        bindings: PathBuf,
    },
    /// Print the metric table for exported project bundles.
    Metrics { bundles: Vec<PathBuf> },
    /// Run the sample items service.
    SampleService {
        #[arg(long, default_value = "127.0.0.1:8090")]
        listen: SocketAddr,
        /// JSON fault plan.
        #[arg(long)]
        faults: Option<PathBuf>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("invalid JSON in {}: {e}", path.display()))
}

async fn run(command: Command) -> Result<(), String> {
    match command {
        Command::Serve { config, listen, scripted } => {
            let mut config = match (config, scripted) {
                (Some(path), None) => ServerConfig::load(&path).map_err(|e| e.to_string())?,
                (None, Some(table)) => ServerConfig::scripted(&table),
                (None, None) => ServerConfig::default(),
                (Some(_), Some(_)) => return Err("give either --config or --scripted".into()),
            };
            if let Some(listen) = listen {
                config.listen = listen;
            }
            let service = Service::from_config(&config).map_err(|e| e.to_string())?;
            let listener = tokio::net::TcpListener::bind(&config.listen)
                .await
                .map_err(|e| format!("cannot listen on {}: {e}", config.listen))?;
            tracing::info!(addr = %config.listen, "serving");
            axum::serve(listener, router(Arc::new(service))).await.map_err(|e| e.to_string())
        }
        Command::Parse { source } => {
            let spec = load_spec(&source).await.map_err(|e| e.to_string())?;
            println!("{} ({} operations)", spec.title, spec.operations.len());
            for warning in &spec.warnings {
                println!("warning: {warning}");
            }
            for op in &spec.operations {
                println!("{}\t{}\t{}", op.id, op.key(), op.summary);
            }
            Ok(())
        }
        Command::Templates => {
            print!("{}", TemplateStore::shipped().to_text());
            Ok(())
        }
        Command::Prompt { template, bindings } => {
            let name = TemplateName::from_store_key(&template).ok_or_else(|| format!("unknown template {template}"))?;
            let bindings: BTreeMap<String, String> = read_json(&bindings)?;
            let rendered = TemplateStore::shipped().render(name, &bindings).map_err(|e| e.to_string())?;
            for warning in &rendered.warnings {
                eprintln!("warning: {warning}");
            }
            println!("--- system\n{}\n--- user\n{}", rendered.prompt.system_message, rendered.prompt.user_message);
            Ok(())
        }
        Command::Metrics { bundles } => {
            let registry = MetricRegistry::default();
            let mut rows = Vec::new();
            for path in &bundles {
                let project = Project::import_bundle(read_json(path)?).map_err(|e| e.to_string())?;
                let records = registry.compute_records(&MetricInputs::from_project(&project), None);
                let values = records.into_iter().filter(|r| r.scope == project.id).map(|r| (r.metric, r.value));
                rows.push(ApiRow { api: project.spec.title.clone(), values: values.collect() });
            }
            print!("{}", render_table(&rows, &registry.names()));
            Ok(())
        }
        Command::SampleService { listen, faults } => {
            let plan = match faults {
                Some(path) => read_json(&path)?,
                None => FaultPlan::none(),
            };
            let service = SampleService::start_on(listen, plan).await.map_err(|e| e.to_string())?;
            println!("sample service on {}, spec at {}", service.base_url(), service.spec_url());
            tokio::signal::ctrl_c().await.map_err(|e| e.to_string())?;
            service.shutdown().await;
            Ok(())
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse().command).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
