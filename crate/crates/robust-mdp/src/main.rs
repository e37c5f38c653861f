fn main() {
    let tol = std::env::var(robust_mdp::cli::TOL_ENV).ok();
    let code = robust_mdp::cli::run(
        std::env::args_os(),
        tol.as_deref(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
