use planverify::corpus::{generate_corpus, oracle_script, write_episode_file, ErrorProfile};

use crate::{CliError, CliResult, GenArgs, EXIT_OK};

pub const ORACLE_FILE: &str = "oracle.script.json";

pub fn run(args: GenArgs) -> CliResult<u8> {
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let profile = ErrorProfile {
        dup_rate: args.dup_rate,
        inv_rate: args.inv_rate,
        irr_rate: args.irr_rate,
        del_rate: args.del_rate,
        seed: args.seed,
        require_errors: args.require_errors,
    };
    let (files, summary) = generate_corpus(args.n, &profile).map_err(|e| CliError::Usage(e.to_string()))?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Fatal(format!("cannot create {}: {e}", args.out.display())))?;
    let mut episodes = Vec::with_capacity(files.len());
    for file in &files {
        let path = write_episode_file(&args.out, file).map_err(|e| CliError::Fatal(e.to_string()))?;
        if args.emit_oracle {
            let ep = file
                .to_episode(&path)
                .map_err(|errs| CliError::Fatal(errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")))?;
            episodes.push(ep);
        }
    }
    if args.emit_oracle {
        let path = args.out.join(ORACLE_FILE);
        let mut json = serde_json::to_string_pretty(&oracle_script(&episodes)).expect("script serializes");
        json.push('\n');
        std::fs::write(&path, json).map_err(|e| CliError::Fatal(format!("cannot write {}: {e}", path.display())))?;
    }

    println!(
        "generated {} episode(s) in {} (seed {}): duplicate {}, inverse_pair {}, irrelevant_pickup {}, deleted {}",
        summary.episodes,
        args.out.display(),
        args.seed,
        summary.duplicate,
        summary.inverse_pair,
        summary.irrelevant_pickup,
        summary.deleted
    );
    Ok(EXIT_OK)
}
