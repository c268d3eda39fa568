fn main() {
    std::process::exit(mtfl_dpc::cli::run_from(std::env::args_os()));
}
