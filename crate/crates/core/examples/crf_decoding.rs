//! Linear-chain CRF: log-partition, path score and Viterbi decoding on a
//! three-label toy problem.

use mdcsa::crf::{log_partition, negative_log_likelihood, path_score, viterbi_decode, TransitionMatrix};
use ndarray::array;

fn main() -> mdcsa::Result<()> {
    let emissions = array![[2.0, 0.5, 0.1], [0.3, 1.0, 0.9], [0.2, 0.4, 1.5], [1.2, 0.1, 0.3]];
    let mut trans = TransitionMatrix::zeros(3);
    // discourage jumping straight from label 0 to label 2
    trans.scores[[0, 2]] = -3.0;
    trans.scores[[1, 1]] = 0.5;

    let z = log_partition(emissions.view(), &trans)?;
    let (best, score) = viterbi_decode(emissions.view(), &trans)?;
    println!("log Z = {z:.4}");
    println!("viterbi path {best:?} with score {score:.4} (recomputed {:.4})", path_score(emissions.view(), &best, &trans)?);
    println!("NLL of the decoded path {:.4}", negative_log_likelihood(emissions.view(), &best, &trans)?);
    print!("{}", trans.render(&["A", "B", "C"]));
    Ok(())
}
