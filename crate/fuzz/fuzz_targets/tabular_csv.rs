#![no_main]

use libfuzzer_sys::fuzz_target;
use pfl_core::problems::Table;

fuzz_target!(|data: &[u8]| {
    let Ok(table) = Table::from_csv_reader(data) else { return };
    assert!(table.rows.iter().all(|r| r.len() == table.headers.len()));
    let mut buf = Vec::new();
    table.write_csv(&mut buf).expect("written table");
    let again = Table::from_csv_reader(buf.as_slice()).expect("written table parses");
    assert_eq!(again, table);
});
