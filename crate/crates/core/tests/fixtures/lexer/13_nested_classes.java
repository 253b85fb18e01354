// file header
package a.b;

import java.util.*;

public class NestedClasses {
    static class Inner {
        int value() { return 42; }
        class Deeper { void go() { new Object() { public String toString() { return "anon"; } }; } }
    }
}
