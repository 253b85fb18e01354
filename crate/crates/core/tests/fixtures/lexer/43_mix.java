// file header
package a.b;

import java.util.*;

public class Mix43 {
    /**/ int a = 1; /***/ int b = 2;
    /* /* not nested */ int c = 3;

    @SuppressWarnings({"unchecked", "rawtypes"})
    @Deprecated(since = "1.2", forRemoval = true)
    void legacy() {}

    String url() {
        return "http://example.org/path // not a comment";
    }
    String block() { return "/* also not a comment */"; }

    static class Inner {
        int value() { return 42; }
        class Deeper { void go() { new Object() { public String toString() { return "anon"; } }; } }
    }

    java.util.Map<String, java.util.List<Integer>> grouped() {
        int shifted = -16 >>> 2 >> 1 << 3;
        return new java.util.HashMap<>();
    }
}
