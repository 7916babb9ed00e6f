//! Writing and reading vote matrices in the compact and full CSV formats.
//!
//! Run with `cargo run --example vote_files`.

use ensemble_roc::vote_model::parse_votes;
use ensemble_roc::{estimate_votes, VoteFormat, VoteMatrix};

fn main() -> ensemble_roc::Result<()> {
    // one row per point, one column per classifier
    let full = vec![
        1, 0, 1, 1, //
        0, 0, 0, 1, //
        1, 1, 1, 1, //
        0, 1, 0, 0, //
    ];
    let votes = VoteMatrix::from_full(full, 4, vec![1, 0, 1, 0])?;
    for format in [VoteFormat::Full, VoteFormat::Compact] {
        let mut buf = Vec::new();
        votes.write(&mut buf, format)?;
        let text = String::from_utf8(buf).unwrap();
        print!("{text}");
        let back = parse_votes(&text)?;
        assert_eq!(back.counts(), votes.counts());
    }
    let est = estimate_votes(&votes, None)?;
    println!("fpr {:?}", est.mean_fpr);
    println!("tpr {:?}", est.mean_tpr);
    Ok(())
}
