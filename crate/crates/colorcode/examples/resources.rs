//! Prints the d=3 resource summary for each readout scheme.
use colorcode::gadgets::{count_resources, Scheme};

fn main() {
    for s in Scheme::ALL {
        println!("{:?}", count_resources(s).expect("resource count"));
    }
}
