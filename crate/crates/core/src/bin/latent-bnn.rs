fn main() -> std::process::ExitCode {
    latent_bnn::cli::main()
}
