use std::panic;
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match panic::catch_unwind(|| lungphase::cli::run(std::env::args_os())) {
        Ok(code) => ExitCode::from(code as u8),
        Err(_) => {
            eprintln!("{}", serde_json::json!({ "error": "InternalError", "message": "internal error (bug); see the panic message above" }));
            ExitCode::from(2)
        }
    }
}
