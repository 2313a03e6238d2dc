fn main() {
    std::process::exit(dblstm_vc::cli::run(std::env::args_os()));
}
