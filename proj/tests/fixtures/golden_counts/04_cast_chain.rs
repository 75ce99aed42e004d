fn cast_play(x: usize) -> usize {
    let p = x as *const u8;
    let q = p as *mut u8;
    let r = x as *mut u8 as usize;
    let back = q as usize;
    back + r + (p as usize)
}
