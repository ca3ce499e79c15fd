use clap::Parser;

fn main() -> anyhow::Result<()> {
    gmm_lda::cli::run(gmm_lda::cli::Cli::parse())
}
