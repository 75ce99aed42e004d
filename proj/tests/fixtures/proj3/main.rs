use std::io::Read;

static mut TOTAL: i64 = 0;

unsafe fn accumulate(p: *const u8, len: usize) -> i64 {
    let mut sum: i64 = 0;
    let mut i = 0;
    while i < len {
        sum += *p.add(i) as i64;
        i += 1;
    }
    TOTAL = TOTAL + sum;
    sum
}

unsafe fn checksum(data: &[u8]) -> i64 {
    let base = accumulate(data.as_ptr(), data.len());
    let scaled = base * 2;
    scaled
}

fn main() {
    let mut input = String::new();
    std::io::stdin().read_to_string(&mut input).unwrap();
    let value = unsafe { checksum(input.trim().as_bytes()) };
    println!("{}", value);
}
