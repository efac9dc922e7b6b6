fn main() {
    std::panic::set_hook(Box::new(|info| {
        let msg = info
            .payload()
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| info.payload().downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        let at = info.location().map(|l| format!(" at {}:{}", l.file(), l.line())).unwrap_or_default();
        eprintln!("{}", si_forge_cli::CliError::internal(format!("{msg}{at}")).line());
    }));
    let code = match std::panic::catch_unwind(|| si_forge_cli::run(std::env::args_os())) {
        Ok(c) => c,
        Err(_) => 3,
    };
    std::process::exit(code);
}
