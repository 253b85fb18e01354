/* license-free header */
public class Mix50 {
    java.util.Map<String, java.util.List<Integer>> grouped() {
        int shifted = -16 >>> 2 >> 1 << 3;
        return new java.util.HashMap<>();
    }

    /**/ int a = 1; /***/ int b = 2;
    /* /* not nested */ int c = 3;

    char[] chars() {
        return new char[] { '"', '\'', '\\', '/', '*', '\n', '\u0041' };
    }

    String quoted() {
        String a = "she said \"hi\"";
        String b = "back\\slash\\";
        String c = "\\\"";
        return a + b + c;
    }
}
