fn tricky() -> String {
    // *mut decoy in a comment: *const u8
    let s = "unsafe { *ptr } as *mut u8";
    /* block comment with unsafe {
       *p = 1; and a call foo(1) */
    let t = r#"raw "*const" string"#;
    format!("{}{}", s, t)
}
