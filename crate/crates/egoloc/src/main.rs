fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SSL_LOG_LEVEL", "warn")).init();
    std::process::exit(egoloc::cli::main_with(std::env::args_os()));
}
