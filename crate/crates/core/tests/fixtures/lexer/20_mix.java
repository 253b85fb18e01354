public class Mix20 {
    java.util.Map<String, java.util.List<Integer>> grouped() {
        int shifted = -16 >>> 2 >> 1 << 3;
        return new java.util.HashMap<>();
    }

    String block() {
        return """
            Hello "world" \""" still inside
            // no comment here
            """;
    }

    char[] chars() {
        return new char[] { '"', '\'', '\\', '/', '*', '\n', '\u0041' };
    }

    static class Inner {
        int value() { return 42; }
        class Deeper { void go() { new Object() { public String toString() { return "anon"; } }; } }
    }
}
