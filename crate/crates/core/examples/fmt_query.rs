use std::io::Read;

fn main() {
    let mut text = String::new();
    std::io::stdin().read_to_string(&mut text).unwrap();
    match sparqlgen_core::sparql_ast::parse(&text) {
        Ok(q) => print!("{}", sparqlgen_core::sparql_ast::serialize(&q)),
        Err(e) => eprintln!("{e}"),
    }
}
