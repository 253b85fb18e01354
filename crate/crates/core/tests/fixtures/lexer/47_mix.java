package demo.lexer;

public class Mix47 {
    /**/ int a = 1; /***/ int b = 2;
    /* /* not nested */ int c = 3;

    @SuppressWarnings({"unchecked", "rawtypes"})
    @Deprecated(since = "1.2", forRemoval = true)
    void legacy() {}
}
