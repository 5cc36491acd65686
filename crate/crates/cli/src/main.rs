use std::io;

fn main() {
    let env_tol = std::env::var(menuforge_cli::TOL_ENV).ok();
    let code = menuforge_cli::run(std::env::args_os(), env_tol.as_deref(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
