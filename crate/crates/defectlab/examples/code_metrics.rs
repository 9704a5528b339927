//! Static code metrics from a source snapshot, no checkout needed.

use defectlab::product_metrics::{compute_product_row, PRODUCT_METRICS};

const SAMPLE: &str = r#"
package demo;

import java.util.List;

/** Tallies positive numbers. */
public class Tally {
    private int total;

    public int addAll(List<Integer> xs) {
        for (Integer x : xs) {
            if (x != null && x > 0) {
                total += x;
            } else {
                skip(x);
            }
        }
        return total;
    }

    private void skip(Integer x) {
        System.out.println("skipping " + x);
    }
}
"#;

fn main() {
    let values = compute_product_row(SAMPLE);
    println!("computed {} of {} metrics natively:\n",
        values.iter().filter(|v| v.is_some()).count(),
        PRODUCT_METRICS.len());

    for (name, value) in PRODUCT_METRICS.iter().zip(&values) {
        match value {
            Some(v) => println!("  {name:<28} {v}"),
            None => println!("  {name:<28} (external tool only)"),
        }
    }
}
