use mindkit::verify::{run, Suite};

#[test]
fn full_default_suites_pass() {
    let rep = run(&Suite::ALL, None, 2024).unwrap();
    for s in &rep.suites {
        println!("{} {} {:.2}s {:?}", s.suite, s.passed, s.seconds, s.checks);
    }
    assert!(rep.passed);
}
