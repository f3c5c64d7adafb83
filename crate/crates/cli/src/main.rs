use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    let code = match rse_qkd_cli::threads_from_env() {
        Ok(threads) => rse_qkd_cli::run(std::env::args_os(), threads, &mut stdout, &mut stderr),
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    };
    let _ = stdout.flush();
    std::process::exit(code);
}
